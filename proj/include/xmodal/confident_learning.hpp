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
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/core.hpp"
#include "xmodal/predict.hpp"

// Confident learning over out-of-sample class probabilities: per-class
// thresholds, the confident joint of (observed label, confident class), its
// calibration, and label-issue flagging with repair suggestions.
namespace xmodal::cl {

using predict::ProbabilityMatrix;

struct ClassThresholds {
  std::vector<double> t;
  std::vector<std::size_t> support;
};

// m x m count matrix, rows = observed label, columns = confident class.
class CountMatrix {
 public:
  explicit CountMatrix(std::size_t m = 0) : m_(m), counts_(m * m, 0) {}
  std::size_t size() const { return m_; }
  std::size_t& operator()(std::size_t i, std::size_t j) { return counts_[i * m_ + j]; }
  std::size_t operator()(std::size_t i, std::size_t j) const { return counts_[i * m_ + j]; }
  std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }
  friend bool operator==(const CountMatrix&, const CountMatrix&) = default;

 private:
  std::size_t m_;
  std::vector<std::size_t> counts_;
};

struct ConfidentJoint {
  CountMatrix counts;
  Matrix calibrated;  // sums to 1
  ClassThresholds thresholds;
  // Column of `counts` each row was counted in; empty when no class cleared
  // its threshold.
  std::vector<std::optional<std::size_t>> confident_class;
};

// t_j = mean predicted probability of class j over rows labelled j.
inline ClassThresholds class_thresholds(const ProbabilityMatrix& p) {
  const std::size_t m = p.num_classes();
  ClassThresholds out{std::vector<double>(m, 0.0), std::vector<std::size_t>(m, 0)};
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const std::size_t y = p.label(r);
    out.t[y] += p(r, y);
    ++out.support[y];
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (out.support[j] == 0) throw EmptyClass("class '" + p.class_index()[j] + "' has no labelled rows");
    out.t[j] /= static_cast<double>(out.support[j]);
  }
  return out;
}

// Q[i][.] = C[i][.] / rowsum(C[i]) * count(label == i) / n, then scaled to
// total 1. All-zero rows of C stay zero.
inline Matrix calibrate_joint(const CountMatrix& c, std::span<const std::size_t> labels) {
  const std::size_t m = c.size();
  if (c.total() == 0) throw DegenerateJoint("confident joint has no counted rows");
  std::vector<double> label_counts(m, 0.0);
  for (std::size_t y : labels) label_counts.at(y) += 1.0;
  const double n = static_cast<double>(labels.size());
  Matrix q(m, m);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t row_sum = 0;
    for (std::size_t j = 0; j < m; ++j) row_sum += c(i, j);
    if (row_sum == 0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      q(i, j) = static_cast<double>(c(i, j)) / static_cast<double>(row_sum) * label_counts[i] / n;
      grand += q(i, j);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) q(i, j) /= grand;
  }
  return q;
}

// Each row with observed label i is counted in C[i][j*], where j* is the
// most probable class among those at or above their threshold (ties to the
// lower index). Rows with no such class are not counted.
inline ConfidentJoint confident_joint(const ProbabilityMatrix& p, const ClassThresholds& thresholds) {
  const std::size_t m = p.num_classes();
  ConfidentJoint joint{CountMatrix(m), Matrix{}, thresholds, std::vector<std::optional<std::size_t>>(p.rows())};
  for (std::size_t r = 0; r < p.rows(); ++r) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < m; ++j) {
      if (p(r, j) < thresholds.t[j]) continue;
      if (!best || p(r, j) > p(r, *best)) best = j;
    }
    joint.confident_class[r] = best;
    if (best) ++joint.counts(p.label(r), *best);
  }
  joint.calibrated = calibrate_joint(joint.counts, p.labels());
  return joint;
}

inline ConfidentJoint confident_joint(const ProbabilityMatrix& p) { return confident_joint(p, class_thresholds(p)); }

struct LabelIssue {
  RowId row = 0;
  double score = 0.0;         // self-confidence p(observed label)
  std::size_t suggested = 0;  // class index of the repair
};

struct LabelIssueReport {
  std::string column;
  std::vector<std::string> class_index;
  std::vector<double> self_confidence;  // every row
  std::vector<LabelIssue> flagged;      // ascending self-confidence, ties by row

  std::set<RowId> flagged_rows() const {
    std::set<RowId> rows;
    for (const auto& issue : flagged) rows.insert(issue.row);
    return rows;
  }
};

inline std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

// Flags every row counted off the diagonal of the confident joint. The repair
// is the row's most probable class, or its confident class when the most
// probable class is the observed one.
inline LabelIssueReport find_label_issues(const ProbabilityMatrix& p, std::string column = {}) {
  const ConfidentJoint joint = confident_joint(p);
  LabelIssueReport report{std::move(column), p.class_index(), std::vector<double>(p.rows()), {}};
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const std::size_t y = p.label(r);
    report.self_confidence[r] = p(r, y);
    const auto& confident = joint.confident_class[r];
    if (!confident || *confident == y) continue;
    std::size_t suggestion = argmax(p.row(r));
    if (suggestion == y) suggestion = *confident;
    report.flagged.push_back({r, p(r, y), suggestion});
  }
  std::stable_sort(report.flagged.begin(), report.flagged.end(),
                   [](const LabelIssue& a, const LabelIssue& b) { return a.score < b.score; });
  return report;
}

inline std::map<RowId, std::string> suggest_repairs(const LabelIssueReport& report,
                                                    std::span<const std::string> class_index) {
  std::map<RowId, std::string> repairs;
  for (const auto& issue : report.flagged) repairs.emplace(issue.row, class_index[issue.suggested]);
  return repairs;
}

inline std::map<RowId, std::string> suggest_repairs(const LabelIssueReport& report) {
  return suggest_repairs(report, report.class_index);
}

inline nlohmann::json to_json(const LabelIssueReport& report) {
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& issue : report.flagged) {
    flagged.push_back(
        {{"row", issue.row}, {"score", issue.score}, {"suggested", report.class_index[issue.suggested]}});
  }
  return {{"column", report.column}, {"flagged", std::move(flagged)}};
}

}  // namespace xmodal::cl
