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
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xmodal/core.hpp"

namespace xmodal::eval {

// Zero denominators yield 0, never NaN.
struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static DetectionMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    DetectionMetrics m{0.0, 0.0, 0.0, tp, fp, fn};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
  }
};

inline DetectionMetrics score_sets(const std::set<RowId>& predicted, const std::set<RowId>& actual) {
  std::size_t tp = 0;
  for (RowId r : predicted) tp += actual.contains(r);
  return DetectionMetrics::from_counts(tp, predicted.size() - tp, actual.size() - tp);
}

inline void check_rows(const std::set<RowId>& rows, std::size_t n) {
  if (!rows.empty() && *rows.rbegin() >= n) {
    throw UnknownRowId("row id " + std::to_string(*rows.rbegin()) + " outside a table of " + std::to_string(n) +
                       " rows");
  }
}

inline DetectionMetrics score_detection(const std::set<RowId>& predicted, const ErrorMask& mask, std::size_t n) {
  check_rows(predicted, n);
  const auto actual = erroneous_rows(mask);
  check_rows(actual, n);
  return score_sets(predicted, actual);
}

using ColumnFlags = std::map<std::string, std::set<RowId>>;

// A tuple is erroneous when any of its cells is.
inline std::set<RowId> tuple_level_prediction(const ColumnFlags& per_column) {
  std::set<RowId> rows;
  for (const auto& [column, flagged] : per_column) rows.insert(flagged.begin(), flagged.end());
  return rows;
}

struct ColumnReport {
  std::string modality;
  std::vector<std::pair<std::string, DetectionMetrics>> columns;  // schema order
  DetectionMetrics overall;
};

// Per column, the positives are rows whose injected error sits in that
// column; rows corrupted elsewhere count as negatives.
inline ColumnReport per_column_metrics(const ColumnFlags& flags, const ErrorMask& mask, std::size_t n,
                                       const std::vector<std::string>& schema_columns, std::string modality = {}) {
  auto known = [&](const std::string& c) {
    return std::find(schema_columns.begin(), schema_columns.end(), c) != schema_columns.end();
  };
  ColumnFlags truth;
  for (const auto& e : mask.entries()) {
    if (!known(e.column)) throw UnknownColumn("mask names unknown column '" + e.column + "'");
    truth[e.column].insert(e.row);
  }
  for (const auto& [column, rows] : flags) {
    if (!known(column)) throw UnknownColumn("flags name unknown column '" + column + "'");
    check_rows(rows, n);
  }
  ColumnReport report{std::move(modality), {}, {}};
  static const std::set<RowId> kNone;
  for (const auto& column : schema_columns) {
    const auto f = flags.find(column);
    const auto t = truth.find(column);
    if (f == flags.end() && t == truth.end()) continue;
    report.columns.emplace_back(column, score_sets(f == flags.end() ? kNone : f->second,
                                                   t == truth.end() ? kNone : t->second));
  }
  report.overall = score_detection(tuple_level_prediction(flags), mask, n);
  return report;
}

struct RepairReport {
  struct Column {
    std::string column;
    std::size_t repaired = 0;
    std::size_t injected = 0;
    double accuracy = 0.0;
  };
  std::vector<Column> columns;  // sorted by column name

  double accuracy(std::string_view column) const {
    for (const auto& c : columns) {
      if (c.column == column) return c.accuracy;
    }
    return 0.0;
  }
};

using CellKey = std::pair<RowId, std::string>;

// Fraction of injected errors per column whose cell was repaired to the
// original value.
inline RepairReport repair_accuracy(const std::map<CellKey, std::string>& repairs, const ErrorMask& mask) {
  std::map<std::string, RepairReport::Column> by_column;
  for (const auto& e : mask.entries()) {
    auto& c = by_column[e.column];
    c.column = e.column;
    ++c.injected;
    const auto it = repairs.find({e.row, e.column});
    if (it != repairs.end() && it->second == e.original) ++c.repaired;
  }
  RepairReport report;
  for (auto& [name, c] : by_column) {
    c.accuracy = static_cast<double>(c.repaired) / static_cast<double>(c.injected);
    report.columns.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const DetectionMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
}

inline nlohmann::json to_json(const ColumnReport& r) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, m] : r.columns) {
    auto entry = to_json(m);
    entry["column"] = name;
    cols.push_back(std::move(entry));
  }
  return {{"modality", r.modality}, {"columns", std::move(cols)}, {"overall", to_json(r.overall)}};
}

inline nlohmann::json to_json(const RepairReport& r) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : r.columns) {
    cols.push_back({{"column", c.column}, {"repaired", c.repaired}, {"injected", c.injected}, {"accuracy", c.accuracy}});
  }
  return {{"columns", std::move(cols)}};
}

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Renders rows of cells with left-aligned, space-padded columns.
inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) line += " | ";
      line += rows[r][i];
      if (i + 1 < rows[r].size()) line.append(width[i] - rows[r][i].size(), ' ');
    }
    out << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 3 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

// Measure rows P / R / F1, one column per attribute plus the tuple level.
inline std::string render_metrics_table(const ColumnReport& report) {
  std::vector<std::vector<std::string>> rows(4);
  rows[0] = {"Measure"};
  rows[1] = {"P"};
  rows[2] = {"R"};
  rows[3] = {"F1"};
  auto add = [&](const std::string& name, const DetectionMetrics& m) {
    rows[0].push_back(name);
    rows[1].push_back(fixed2(m.precision));
    rows[2].push_back(fixed2(m.recall));
    rows[3].push_back(fixed2(m.f1));
  };
  for (const auto& [name, m] : report.columns) add(name, m);
  add("Tuple", report.overall);
  std::string out;
  if (!report.modality.empty()) out += "Modality: " + report.modality + "\n";
  return out + render_table(rows);
}

inline std::string render_repair_table(const RepairReport& report) {
  std::vector<std::vector<std::string>> rows(2);
  rows[0] = {"Measure"};
  rows[1] = {"Repair"};
  for (const auto& c : report.columns) {
    rows[0].push_back(c.column);
    rows[1].push_back(fixed2(c.accuracy));
  }
  return render_table(rows);
}

}  // namespace xmodal::eval
