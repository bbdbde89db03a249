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

#include "xmodal/knn_shapley.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "xmodal/random.hpp"

namespace xmodal::shapley {
namespace {

LabeledPoints points(const oracle::Rows& rows, std::vector<std::size_t> labels) {
  const std::size_t dim = rows.empty() ? 1 : rows.front().size();
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return LabeledPoints{Matrix(rows.size(), dim, std::move(flat)), std::move(labels)};
}

struct Instance {
  oracle::Rows x, val;
  std::vector<std::size_t> y, val_y;

  ValuationInput input() const { return ValuationInput{points(x, y), points(val, val_y)}; }
};

Instance random_instance(SplitMix64& rng, std::size_t n, std::size_t v, std::size_t m, bool grid = true) {
  Instance inst;
  // A small grid makes distance ties common.
  auto coord = [&] { return grid ? static_cast<double>(rng.uniform(7)) : rng.normal(); };
  for (std::size_t i = 0; i < n; ++i) {
    inst.x.push_back({coord(), coord()});
    inst.y.push_back(rng.uniform(m));
  }
  for (std::size_t i = 0; i < v; ++i) {
    inst.val.push_back({coord(), coord()});
    inst.val_y.push_back(rng.uniform(m));
  }
  return inst;
}

void expect_values(const std::vector<double>& actual, const std::vector<double>& expected, double tol = 1e-12) {
  ASSERT_EQ(actual.size(), expected.size());
  for (std::size_t i = 0; i < actual.size(); ++i) EXPECT_NEAR(actual[i], expected[i], tol) << "tuple " << i;
}

TEST(KnnShapleyTest, SingleTuple) {
  const Instance inst{{{0.0}}, {{0.0}}, {0}, {0}};
  expect_values(knn_shapley(inst.input()).shapley, {1.0});
}

TEST(KnnShapleyTest, TwoTuples) {
  const Instance correct_first{{{0.0}, {5.0}}, {{0.0}}, {0, 1}, {0}};
  expect_values(knn_shapley(correct_first.input()).shapley, {1.0, 0.0});
  const Instance wrong_first{{{0.0}, {5.0}}, {{0.0}}, {1, 0}, {0}};
  const auto result = knn_shapley(wrong_first.input());
  expect_values(result.shapley, {-0.5, 0.5});
  EXPECT_EQ(result.flagged, (std::set<RowId>{0}));
}

TEST(KnnShapleyTest, ThreeTuplesMatchPermutationOracle) {
  const Instance inst{{{0.0}, {1.0}, {2.0}}, {{0.0}}, {1, 0, 0}, {0}};
  const auto values = knn_shapley(inst.input()).shapley;
  expect_values(values, {-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  expect_values(values, oracle::permutation_shapley(inst.x, inst.y, inst.val, inst.val_y));
}

TEST(KnnShapleyTest, RecurrenceMatchesBruteForce) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = random_instance(rng, 1 + rng.uniform(kMaxBruteForceTuples), 1 + rng.uniform(5), 2 + rng.uniform(2));
    expect_values(knn_shapley(inst.input()).shapley, brute_force_shapley(inst.input()), 1e-9);
  }
}

TEST(KnnShapleyTest, RecurrenceMatchesPermutationOracle) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng, 1 + rng.uniform(7), 1 + rng.uniform(4), 2);
    expect_values(knn_shapley(inst.input()).shapley, oracle::permutation_shapley(inst.x, inst.y, inst.val, inst.val_y),
                  1e-9);
  }
}

TEST(KnnShapleyProperty, Efficiency) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng, 1 + rng.uniform(40), 1 + rng.uniform(10), 3);
    const auto result = knn_shapley(inst.input());
    const double total = std::accumulate(result.shapley.begin(), result.shapley.end(), 0.0);
    std::vector<bool> all(inst.x.size(), true);
    const double full = oracle::utility(inst.x, inst.y, all, inst.val, inst.val_y);
    EXPECT_NEAR(result.utility_full, full, 1e-12);
    EXPECT_NEAR(total, full - result.utility_empty, 1e-9);
  }
}

TEST(KnnShapleyProperty, NullPlayerGetsZero) {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng, 1 + rng.uniform(10), 1 + rng.uniform(5), 2);
    // Far from everything and carrying a label no validation point has.
    inst.x.push_back({1e6, 1e6});
    inst.y.push_back(7);
    const auto values = knn_shapley(inst.input()).shapley;
    EXPECT_NEAR(values.back(), 0.0, 1e-12);
  }
}

TEST(KnnShapleyProperty, ScaleInvariance) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 1 + rng.uniform(20), 1 + rng.uniform(5), 3);
    auto scaled = inst;
    for (auto& r : scaled.x) for (double& v : r) v *= 4.0;
    for (auto& r : scaled.val) for (double& v : r) v *= 4.0;
    expect_values(knn_shapley(scaled.input()).shapley, knn_shapley(inst.input()).shapley);
  }
}

TEST(KnnShapleyProperty, DuplicatesShareValue) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    // Continuous coordinates: a third tuple tied with the pair would break symmetry.
    auto inst = random_instance(rng, 2 + rng.uniform(15), 1 + rng.uniform(5), 2, false);
    const std::size_t src = rng.uniform(inst.x.size());
    inst.x.push_back(inst.x[src]);
    inst.y.push_back(inst.y[src]);
    const auto values = knn_shapley(inst.input()).shapley;
    EXPECT_NEAR(values[src], values.back(), 1e-12);
  }
}

TEST(KnnShapleyTest, CorruptedTupleIsMostNegative) {
  SplitMix64 rng(9);
  Instance inst;
  for (std::size_t i = 0; i < 10; ++i) {
    const std::size_t c = i % 2;
    const double centre = c == 0 ? 0.0 : 10.0;
    inst.x.push_back({centre + rng.normal(), centre + rng.normal()});
    inst.y.push_back(c);
    inst.val.push_back({centre + rng.normal(), centre + rng.normal()});
    inst.val_y.push_back(c);
  }
  inst.y[4] = 1;  // tuple 4 sits in cluster 0
  const auto result = knn_shapley(inst.input());
  const auto lowest = std::min_element(result.shapley.begin(), result.shapley.end()) - result.shapley.begin();
  EXPECT_EQ(lowest, 4);
  EXPECT_LT(result.shapley[4], 0.0);
  EXPECT_TRUE(result.flagged.contains(4));
}

TEST(FlagErrorsTest, StrictlyNegativeOnly) {
  const std::vector<double> values = {0.2, -0.1, 0.0};
  EXPECT_EQ(flag_errors(values), (std::set<RowId>{1}));
  EXPECT_TRUE(flag_errors(std::vector<double>{}).empty());
}

TEST(KnnShapleyTest, InputErrors) {
  const Instance empty_dirty{{}, {{0.0}}, {}, {0}};
  EXPECT_THROW(knn_shapley(empty_dirty.input()), EmptyDirtySet);
  const Instance empty_clean{{{0.0}}, {}, {0}, {}};
  EXPECT_THROW(knn_shapley(empty_clean.input()), EmptyCleanSet);
  SplitMix64 rng(10);
  const auto big = random_instance(rng, kMaxBruteForceTuples + 1, 2, 2);
  EXPECT_THROW(brute_force_shapley(big.input()), TooLarge);
  EXPECT_NO_THROW(knn_shapley(big.input()));
}

TEST(KnnShapleyTest, JsonReport) {
  const Instance inst{{{0.0}, {5.0}}, {{0.0}}, {1, 0}, {0}};
  const auto doc = to_json(knn_shapley(inst.input()), "Gender");
  EXPECT_EQ(doc["column"], "Gender");
  EXPECT_EQ(doc["flagged"], nlohmann::json::array({0}));
  EXPECT_DOUBLE_EQ(doc["shapley"][1]["value"].get<double>(), 0.5);
  EXPECT_EQ(doc["shapley"][1]["row"], 1);
}

}  // namespace
}  // namespace xmodal::shapley
