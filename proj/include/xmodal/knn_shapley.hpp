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
#include <bit>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/core.hpp"
#include "xmodal/matrix.hpp"

// Exact Data Shapley values of "dirty" tuples under a 1-nearest-neighbour
// utility: U(S) = fraction of clean validation points whose nearest member
// of S carries the same label, U(empty) = 0.
namespace xmodal::shapley {

struct LabeledPoints {
  Matrix features;
  std::vector<std::size_t> labels;

  std::size_t size() const { return features.rows(); }
};

struct ValuationInput {
  LabeledPoints dirty;
  LabeledPoints clean;

  void validate() const {
    if (dirty.size() == 0) throw EmptyDirtySet("no tuples to value");
    if (clean.size() == 0) throw EmptyCleanSet("no validation tuples");
    if (dirty.labels.size() != dirty.size() || clean.labels.size() != clean.size()) {
      throw RowCountMismatch("label count does not match feature rows");
    }
    if (dirty.features.cols() != clean.features.cols()) {
      throw AlignmentError("dirty and clean features differ in dimension");
    }
  }
};

struct ValuationResult {
  std::vector<double> shapley;  // one per dirty tuple
  std::set<RowId> flagged;      // tuples with negative value
  double utility_full = 0.0;
  double utility_empty = 0.0;
};

// Dirty tuple indices by ascending distance to `point`, ties to lower index.
inline std::vector<std::size_t> neighbour_order(const Matrix& dirty, std::span<const double> point) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(dirty.rows());
  for (std::size_t i = 0; i < dirty.rows(); ++i) dist.emplace_back(squared_distance(dirty.row(i), point), i);
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> order;
  order.reserve(dist.size());
  for (const auto& d : dist) order.push_back(d.second);
  return order;
}

// Contribution of each dirty tuple for a single validation point. With
// a_1..a_N the neighbour order:
//   s[a_N] = match(a_N) / N
//   s[a_i] = s[a_{i+1}] + (match(a_i) - match(a_{i+1})) / i
inline std::vector<double> knn_shapley_single(const LabeledPoints& dirty, std::span<const double> point,
                                              std::size_t label) {
  const std::size_t n = dirty.size();
  if (n == 0) throw EmptyDirtySet("no tuples to value");
  const auto order = neighbour_order(dirty.features, point);
  auto match = [&](std::size_t i) { return dirty.labels[order[i]] == label ? 1.0 : 0.0; };
  std::vector<double> s(n);
  double value = match(n - 1) / static_cast<double>(n);
  s[order[n - 1]] = value;
  for (std::size_t i = n - 1; i-- > 0;) {
    value += (match(i) - match(i + 1)) / static_cast<double>(i + 1);
    s[order[i]] = value;
  }
  return s;
}

inline std::set<RowId> flag_errors(std::span<const double> values) {
  std::set<RowId> flagged;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0.0) flagged.insert(i);
  }
  return flagged;
}

inline std::set<RowId> flag_errors(const ValuationResult& result) { return flag_errors(result.shapley); }

// Averages the single-point values over every validation point.
inline ValuationResult knn_shapley(const ValuationInput& input) {
  input.validate();
  const std::size_t n = input.dirty.size();
  const std::size_t v = input.clean.size();
  ValuationResult result{std::vector<double>(n, 0.0), {}, 0.0, 0.0};
  for (std::size_t p = 0; p < v; ++p) {
    const auto point = input.clean.features.row(p);
    const std::size_t label = input.clean.labels[p];
    const auto s = knn_shapley_single(input.dirty, point, label);
    for (std::size_t i = 0; i < n; ++i) result.shapley[i] += s[i];
    const std::size_t nearest = neighbour_order(input.dirty.features, point).front();
    if (input.dirty.labels[nearest] == label) result.utility_full += 1.0;
  }
  for (double& s : result.shapley) s /= static_cast<double>(v);
  result.utility_full /= static_cast<double>(v);
  result.flagged = flag_errors(result.shapley);
  return result;
}

inline constexpr std::size_t kMaxBruteForceTuples = 12;

// Shapley values by enumerating all 2^N coalitions of dirty tuples and
// weighting marginal contributions by |S|! (N-|S|-1)! / N!.
inline std::vector<double> brute_force_shapley(const ValuationInput& input) {
  input.validate();
  const std::size_t n = input.dirty.size();
  if (n > kMaxBruteForceTuples) {
    throw TooLarge(std::to_string(n) + " tuples exceed the brute-force limit of " +
                   std::to_string(kMaxBruteForceTuples));
  }
  const std::size_t v = input.clean.size();
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t p = 0; p < v; ++p) orders.push_back(neighbour_order(input.dirty.features, input.clean.features.row(p)));

  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> utility(subsets, 0.0);
  for (std::size_t mask = 1; mask < subsets; ++mask) {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < v; ++p) {
      for (std::size_t i : orders[p]) {
        if (mask & (std::size_t{1} << i)) {
          hits += input.dirty.labels[i] == input.clean.labels[p];
          break;
        }
      }
    }
    utility[mask] = static_cast<double>(hits) / static_cast<double>(v);
  }

  std::vector<double> factorial(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  std::vector<double> values(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[size] * factorial[n - size - 1] / factorial[n];
      values[i] += weight * (utility[mask | bit] - utility[mask]);
    }
  }
  return values;
}

inline nlohmann::json to_json(const ValuationResult& result, std::string_view column = {}) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < result.shapley.size(); ++i) values.push_back({{"row", i}, {"value", result.shapley[i]}});
  nlohmann::json doc = {{"shapley", std::move(values)},
                        {"flagged", std::vector<RowId>(result.flagged.begin(), result.flagged.end())},
                        {"utility_full", result.utility_full}};
  if (!column.empty()) doc["column"] = std::string(column);
  return doc;
}

}  // namespace xmodal::shapley
