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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xmodal/core.hpp"
#include "xmodal/random.hpp"

namespace xmodal::corrupt {

struct CorruptionConfig {
  double row_fraction = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::string> eligible_columns;
  bool enforce_observed_pairs = true;
  std::vector<std::string> propagation_columns;

  // Throws ConfigError (or UnknownColumn) when the config does not fit `dataset`.
  void validate(const AlignedDataset& dataset) const {
    if (!(row_fraction >= 0.0 && row_fraction <= 1.0)) {
      throw ConfigError("row_fraction must lie in [0, 1], got " + std::to_string(row_fraction));
    }
    if (eligible_columns.empty()) throw ConfigError("no eligible columns");
    for (const auto& name : eligible_columns) {
      if (!dataset.column(name).is_categorical()) {
        throw ConfigError("eligible column '" + name + "' is not categorical");
      }
    }
    for (const auto& name : propagation_columns) {
      if (dataset.column(name).kind != ColumnKind::free_text) {
        throw ConfigError("propagation column '" + name + "' is not free-text");
      }
    }
  }

  // Categorical columns as eligible, declared propagation targets as propagation columns.
  static CorruptionConfig defaults_for(const AlignedDataset& dataset) {
    CorruptionConfig config;
    for (const auto& c : dataset.columns()) {
      if (c.is_categorical()) config.eligible_columns.push_back(c.name);
      if (c.propagation_target) config.propagation_columns.push_back(c.name);
    }
    return config;
  }
};

inline nlohmann::json to_json(const CorruptionConfig& c) {
  return {{"row_fraction", c.row_fraction},
          {"seed", c.seed},
          {"eligible_columns", c.eligible_columns},
          {"enforce_observed_pairs", c.enforce_observed_pairs},
          {"propagation_columns", c.propagation_columns}};
}

// Fields absent from `doc` keep the values already in `base`.
inline CorruptionConfig config_from_json(const nlohmann::json& doc, CorruptionConfig base = {}) {
  try {
    if (doc.contains("row_fraction")) base.row_fraction = doc["row_fraction"].get<double>();
    if (doc.contains("seed")) base.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("eligible_columns")) base.eligible_columns = doc["eligible_columns"].get<std::vector<std::string>>();
    if (doc.contains("enforce_observed_pairs")) base.enforce_observed_pairs = doc["enforce_observed_pairs"].get<bool>();
    if (doc.contains("propagation_columns")) {
      base.propagation_columns = doc["propagation_columns"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed corruption config: ") + e.what());
  }
  return base;
}

// Value pairs of two columns that occur together in at least one row.
struct PairConstraint {
  std::string first;
  std::string second;
  std::set<std::pair<std::string, std::string>> observed;

  bool allows(const std::string& a, const std::string& b) const { return observed.contains({a, b}); }
};

inline PairConstraint observed_pairs(const AlignedDataset& dataset, std::string_view col_a, std::string_view col_b) {
  const std::size_t a = dataset.column_index(col_a);
  const std::size_t b = dataset.column_index(col_b);
  PairConstraint constraint{std::string(col_a), std::string(col_b), {}};
  for (const auto& t : dataset.tuples()) constraint.observed.emplace(t[a], t[b]);
  return constraint;
}

// ---------------------------------------------------------------------------
// Whole-word, ASCII case-insensitive matching used to keep free-text columns
// consistent with the injected value.

namespace detail {

inline bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

inline bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (lower(text[pos + i]) != lower(word[i])) return false;
  }
  return true;
}

}  // namespace detail

// Position of the first whole-word, case-insensitive occurrence at or after `from`.
inline std::optional<std::size_t> find_word(std::string_view text, std::string_view word, std::size_t from = 0) {
  if (word.empty()) return std::nullopt;
  for (std::size_t pos = from; pos + word.size() <= text.size(); ++pos) {
    if (!detail::iequals_at(text, pos, word)) continue;
    const bool left_ok = pos == 0 || !detail::is_word_byte(text[pos - 1]) || !detail::is_word_byte(word.front());
    const std::size_t end = pos + word.size();
    const bool right_ok = end == text.size() || !detail::is_word_byte(text[end]) || !detail::is_word_byte(word.back());
    if (left_ok && right_ok) return pos;
  }
  return std::nullopt;
}

inline bool contains_word(std::string_view text, std::string_view word) { return find_word(text, word).has_value(); }

// Applies the letter case of `matched` to `replacement`: all-lower, all-upper
// (two or more letters) and leading-capital patterns carry over.
inline std::string match_case(std::string_view matched, std::string_view replacement) {
  bool any_upper = false, any_lower = false;
  std::size_t letters = 0;
  for (char c : matched) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      ++letters;
      any_upper |= std::isupper(u) != 0;
      any_lower |= std::islower(u) != 0;
    }
  }
  std::string out(replacement);
  if (letters == 0) return out;
  if (!any_upper) {
    std::transform(out.begin(), out.end(), out.begin(), detail::lower);
  } else if (!any_lower && letters >= 2) {
    std::transform(out.begin(), out.end(), out.begin(),
                   [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); });
  } else {
    const auto first = std::find_if(matched.begin(), matched.end(),
                                    [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
    if (std::isupper(static_cast<unsigned char>(*first))) {
      auto it = std::find_if(out.begin(), out.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
      if (it != out.end()) *it = static_cast<char>(std::toupper(static_cast<unsigned char>(*it)));
    }
  }
  return out;
}

// Replaces every whole-word occurrence of `original` in `text` with
// `replacement`, preserving each occurrence's case pattern.
inline std::string replace_words(std::string_view text, std::string_view original, std::string_view replacement) {
  std::string out;
  std::size_t cursor = 0;
  while (auto pos = find_word(text, original, cursor)) {
    out.append(text.substr(cursor, *pos - cursor));
    out.append(match_case(text.substr(*pos, original.size()), replacement));
    cursor = *pos + original.size();
  }
  out.append(text.substr(cursor));
  return out;
}

// ---------------------------------------------------------------------------

struct CorruptionResult {
  AlignedDataset dataset;
  ErrorMask mask;
};

inline std::size_t corruption_quota(double row_fraction, std::size_t rows) {
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  return static_cast<std::size_t>(std::floor(row_fraction * static_cast<double>(rows) + 1e-9));
}

// Replaces one cell in floor(row_fraction * n) rows with a different value
// already present in that column. Rows come from a seeded permutation; each
// row gets a uniformly chosen eligible column and a uniformly chosen
// replacement. With enforce_observed_pairs, a replacement must form observed
// pairs with every column in the same correlated group. Occurrences of the
// original value in the propagation columns of that row are rewritten.
inline CorruptionResult inject_errors(const AlignedDataset& dataset, const CorruptionConfig& config) {
  config.validate(dataset);

  struct Eligible {
    std::size_t index;
    std::vector<std::string> values;  // sorted distinct values
    std::vector<std::pair<std::size_t, PairConstraint>> partners;
  };
  std::vector<Eligible> eligible;
  for (const auto& name : config.eligible_columns) {
    Eligible e{dataset.column_index(name), distinct_values(dataset, name), {}};
    if (e.values.size() < 2) {
      throw DegenerateColumn("column '" + name + "' has a single distinct value");
    }
    const auto& schema = dataset.columns()[e.index];
    if (config.enforce_observed_pairs && schema.correlated_group) {
      for (std::size_t j = 0; j < dataset.num_columns(); ++j) {
        const auto& other = dataset.columns()[j];
        if (j != e.index && other.correlated_group == schema.correlated_group) {
          e.partners.emplace_back(j, observed_pairs(dataset, name, other.name));
        }
      }
    }
    eligible.push_back(std::move(e));
  }
  std::vector<std::size_t> propagation;
  for (const auto& name : config.propagation_columns) propagation.push_back(dataset.column_index(name));

  const std::size_t quota = corruption_quota(config.row_fraction, dataset.size());
  if (quota == 0) return {dataset, ErrorMask{}};

  SplitMix64 rng(config.seed);
  const std::vector<std::size_t> row_order = rng.permutation(dataset.size());
  std::vector<AlignedDataset::Tuple> tuples = dataset.tuples();
  std::vector<CellError> entries;

  for (const std::size_t row : row_order) {
    if (entries.size() == quota) break;
    auto& tuple = tuples[row];
    // Columns are tried in a random order (the first pick is uniform); the
    // row is skipped only when none of them admits a replacement.
    for (const std::size_t pick : rng.permutation(eligible.size())) {
      const Eligible& column = eligible[pick];
      const std::string& original = tuple[column.index];
      const bool propagates = std::any_of(propagation.begin(), propagation.end(),
                                          [&](std::size_t p) { return contains_word(tuple[p], original); });
      std::vector<const std::string*> candidates;
      for (const auto& value : column.values) {
        if (value == original) continue;
        const bool pairs_ok = std::all_of(column.partners.begin(), column.partners.end(), [&](const auto& partner) {
          return partner.second.allows(value, tuple[partner.first]);
        });
        if (!pairs_ok) continue;
        // A replacement that itself contains the original word would leak it.
        if (propagates && contains_word(value, original)) continue;
        candidates.push_back(&value);
      }
      if (candidates.empty()) continue;

      const std::string injected = *candidates[rng.uniform(candidates.size())];
      CellError entry{.row = row,
                      .column = dataset.columns()[column.index].name,
                      .original = original,
                      .injected = injected};
      for (const std::size_t p : propagation) {
        if (!contains_word(tuple[p], original)) continue;
        std::string rewritten = replace_words(tuple[p], original, injected);
        entry.propagated.push_back({dataset.columns()[p].name, tuple[p], rewritten});
        tuple[p] = std::move(rewritten);
      }
      tuple[column.index] = injected;
      entries.push_back(std::move(entry));
      break;
    }
  }
  if (entries.size() < quota) {
    throw NoCandidateValue("only " + std::to_string(entries.size()) + " of " + std::to_string(quota) +
                           " rows admit a constraint-satisfying replacement");
  }
  std::sort(entries.begin(), entries.end(), [](const CellError& a, const CellError& b) { return a.row < b.row; });
  return {dataset.with_tuples(std::move(tuples)), ErrorMask(std::move(entries))};
}

}  // namespace xmodal::corrupt
