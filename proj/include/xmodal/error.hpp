/*
 * Copyright 2026 The xmodal Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace xmodal {

// Base of every error raised by the library. Errors derived from ConfigError
// describe bad parameters; everything else describes bad data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

#define XMODAL_DEFINE_ERROR(Name, Base)  \
  class Name : public Base {             \
   public:                               \
    using Base::Base;                    \
  }

// Parameter errors.
XMODAL_DEFINE_ERROR(UnknownColumn, ConfigError);
XMODAL_DEFINE_ERROR(TooLarge, ConfigError);

// Data errors.
XMODAL_DEFINE_ERROR(ParseError, Error);
XMODAL_DEFINE_ERROR(AlignmentError, Error);
XMODAL_DEFINE_ERROR(SchemaError, Error);
XMODAL_DEFINE_ERROR(DegenerateColumn, Error);
XMODAL_DEFINE_ERROR(NoCandidateValue, Error);
XMODAL_DEFINE_ERROR(DegenerateTarget, Error);
XMODAL_DEFINE_ERROR(TooFewRows, Error);
XMODAL_DEFINE_ERROR(ClassMismatch, Error);
XMODAL_DEFINE_ERROR(RowCountMismatch, Error);
XMODAL_DEFINE_ERROR(EmptyClass, Error);
XMODAL_DEFINE_ERROR(DegenerateJoint, Error);
XMODAL_DEFINE_ERROR(EmptyDirtySet, Error);
XMODAL_DEFINE_ERROR(EmptyCleanSet, Error);
XMODAL_DEFINE_ERROR(UnknownRowId, Error);

#undef XMODAL_DEFINE_ERROR

}  // namespace xmodal
