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
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xmodal/csv.hpp"
#include "xmodal/error.hpp"

namespace xmodal {

// Rows are identified by their zero-based position in the table.
using RowId = std::size_t;

enum class ColumnKind { categorical, free_text };

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::categorical ? "categorical" : "free-text";
}

inline ColumnKind parse_column_kind(std::string_view text) {
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "free-text" || text == "free_text" || text == "text") return ColumnKind::free_text;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  // Columns sharing a group label must keep their value pairs jointly observed.
  std::optional<std::string> correlated_group;
  // Free-text column (e.g. a product title) that embeds categorical values.
  bool propagation_target = false;

  bool is_categorical() const { return kind == ColumnKind::categorical; }
  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

// One image stand-in vector per row, stored row-major.
class Embeddings {
 public:
  Embeddings() = default;
  Embeddings(std::size_t rows, std::size_t dim, std::vector<float> values)
      : rows_(rows), dim_(dim), values_(std::move(values)) {
    if (values_.size() != rows_ * dim_) {
      throw AlignmentError("embedding buffer holds " + std::to_string(values_.size()) +
                           " values, expected " + std::to_string(rows_ * dim_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw ParseError("non-finite embedding value in row " + std::to_string(i / std::max<std::size_t>(dim_, 1)));
      }
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
  const std::vector<float>& values() const { return values_; }

  friend bool operator==(const Embeddings& a, const Embeddings& b) {
    return a.rows_ == b.rows_ && a.dim_ == b.dim_ &&
           (a.values_.empty() ||
            std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// ---------------------------------------------------------------------------
// XMEB embedding files: "XMEB", u32 rows, u32 dim, rows*dim binary32, all
// little-endian.

namespace xmeb {

inline constexpr std::array<char, 4> kMagic = {'X', 'M', 'E', 'B'};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

inline std::string encode(const Embeddings& emb) {
  std::string out(kMagic.begin(), kMagic.end());
  out.reserve(12 + emb.values().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(emb.rows()));
  put_u32(out, static_cast<std::uint32_t>(emb.dim()));
  for (float f : emb.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline Embeddings decode(std::string_view bytes, std::string_view source = "<xmeb>") {
  const std::string where(source);
  if (bytes.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw ParseError(where + ": missing XMEB header");
  }
  const std::uint64_t rows = get_u32(bytes, 4);
  const std::uint64_t dim = get_u32(bytes, 8);
  if (dim == 0) throw ParseError(where + ": embedding dimension must be at least 1");
  if (bytes.size() != 12 + rows * dim * 4) {
    throw ParseError(where + ": expected " + std::to_string(12 + rows * dim * 4) + " bytes, found " +
                     std::to_string(bytes.size()));
  }
  std::vector<float> values(rows * dim);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  try {
    return Embeddings(rows, dim, std::move(values));
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline Embeddings read(const std::string& path) { return decode(csv::read_file(path), path); }

inline void write(const std::string& path, const Embeddings& emb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  const std::string bytes = encode(emb);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace xmeb

// ---------------------------------------------------------------------------

// A relational table whose rows are aligned by position with embedding
// vectors. Immutable after construction; copies share the embedding buffer.
class AlignedDataset {
 public:
  using Tuple = std::vector<std::string>;

  AlignedDataset(std::vector<ColumnSchema> columns, std::vector<Tuple> tuples,
                 std::shared_ptr<const Embeddings> embeddings)
      : columns_(std::move(columns)), tuples_(std::move(tuples)), embeddings_(std::move(embeddings)) {
    if (!embeddings_) throw AlignmentError("dataset has no embeddings");
    validate();
  }

  AlignedDataset(std::vector<ColumnSchema> columns, std::vector<Tuple> tuples, Embeddings embeddings)
      : AlignedDataset(std::move(columns), std::move(tuples),
                       std::make_shared<const Embeddings>(std::move(embeddings))) {}

  std::size_t size() const { return tuples_.size(); }
  std::size_t num_columns() const { return columns_.size(); }
  std::size_t dimension() const { return embeddings_->dim(); }

  const std::vector<ColumnSchema>& columns() const { return columns_; }
  const std::vector<Tuple>& tuples() const { return tuples_; }
  const Tuple& tuple(RowId row) const { return tuples_.at(row); }
  const Embeddings& embeddings() const { return *embeddings_; }
  const std::shared_ptr<const Embeddings>& shared_embeddings() const { return embeddings_; }
  std::span<const float> embedding(RowId row) const { return embeddings_->row(row); }

  bool has_column(std::string_view name) const { return index_.contains(std::string(name)); }

  std::size_t column_index(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw UnknownColumn("unknown column '" + std::string(name) + "'");
    return it->second;
  }

  const ColumnSchema& column(std::string_view name) const { return columns_[column_index(name)]; }

  const std::string& cell(RowId row, std::size_t col) const { return tuples_.at(row).at(col); }
  const std::string& cell(RowId row, std::string_view col) const { return cell(row, column_index(col)); }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names;
    names.reserve(columns_.size());
    for (const auto& c : columns_) names.push_back(c.name);
    return names;
  }

  // Same data under a different schema (names must match positionally).
  AlignedDataset with_schema(std::vector<ColumnSchema> columns) const {
    return AlignedDataset(std::move(columns), tuples_, embeddings_);
  }

  // Same schema and embeddings, new cell values.
  AlignedDataset with_tuples(std::vector<Tuple> tuples) const {
    return AlignedDataset(columns_, std::move(tuples), embeddings_);
  }

 private:
  void validate() {
    std::map<std::string, std::size_t> group_sizes;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (!index_.emplace(columns_[i].name, i).second) {
        throw SchemaError("duplicate column name '" + columns_[i].name + "'");
      }
      if (columns_[i].correlated_group) ++group_sizes[*columns_[i].correlated_group];
    }
    for (const auto& [group, count] : group_sizes) {
      if (count < 2) throw SchemaError("correlated group '" + group + "' has a single column");
    }
    for (std::size_t r = 0; r < tuples_.size(); ++r) {
      if (tuples_[r].size() != columns_.size()) {
        throw ParseError("row " + std::to_string(r) + " has " + std::to_string(tuples_[r].size()) +
                         " cells, expected " + std::to_string(columns_.size()));
      }
    }
    if (embeddings_->rows() != tuples_.size()) {
      throw AlignmentError("table has " + std::to_string(tuples_.size()) + " rows but embeddings have " +
                           std::to_string(embeddings_->rows()));
    }
    if (embeddings_->dim() == 0) throw AlignmentError("embedding dimension must be at least 1");
  }

  std::vector<ColumnSchema> columns_;
  std::vector<Tuple> tuples_;
  std::shared_ptr<const Embeddings> embeddings_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Schema sidecar: {"columns": [{"name", "kind", "correlated_group",
// "propagation_target"}]}. Columns not listed stay categorical.

inline std::vector<ColumnSchema> apply_schema(std::vector<ColumnSchema> columns, const nlohmann::json& doc) {
  if (!doc.contains("columns") || !doc["columns"].is_array()) throw SchemaError("schema needs a 'columns' array");
  for (const auto& entry : doc["columns"]) {
    const auto name = entry.at("name").get<std::string>();
    auto it = std::find_if(columns.begin(), columns.end(), [&](const ColumnSchema& c) { return c.name == name; });
    if (it == columns.end()) throw SchemaError("schema names unknown column '" + name + "'");
    if (entry.contains("kind")) it->kind = parse_column_kind(entry["kind"].get<std::string>());
    if (entry.contains("correlated_group") && !entry["correlated_group"].is_null()) {
      it->correlated_group = entry["correlated_group"].get<std::string>();
    }
    if (entry.contains("propagation_target")) it->propagation_target = entry["propagation_target"].get<bool>();
    if (it->propagation_target && it->kind != ColumnKind::free_text) {
      throw SchemaError("propagation target '" + name + "' must be free-text");
    }
  }
  return columns;
}

inline nlohmann::json schema_to_json(const std::vector<ColumnSchema>& columns) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    nlohmann::json entry = {{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (c.correlated_group) entry["correlated_group"] = *c.correlated_group;
    if (c.propagation_target) entry["propagation_target"] = true;
    cols.push_back(std::move(entry));
  }
  return {{"columns", cols}};
}

inline nlohmann::json read_json(const std::string& path) {
  const std::string text = csv::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << text;
}

inline AlignedDataset load_dataset(const std::string& table_path, const std::string& embeddings_path,
                                   const std::optional<std::string>& schema_path = std::nullopt) {
  auto records = csv::read(table_path);
  if (records.empty()) throw ParseError(table_path + ": missing header row");
  std::vector<ColumnSchema> columns;
  for (auto& name : records.front()) columns.push_back(ColumnSchema{.name = std::move(name)});
  records.erase(records.begin());
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != columns.size()) {
      throw ParseError(table_path + ": data row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(columns.size()));
    }
  }
  {
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (!seen.insert(c.name).second) throw SchemaError(table_path + ": duplicate column '" + c.name + "'");
    }
  }
  if (schema_path) columns = apply_schema(std::move(columns), read_json(*schema_path));
  return AlignedDataset(std::move(columns), std::move(records), xmeb::read(embeddings_path));
}

inline std::string table_to_csv(const AlignedDataset& dataset) {
  std::ostringstream out;
  csv::write_record(out, dataset.column_names());
  for (const auto& t : dataset.tuples()) csv::write_record(out, t);
  return out.str();
}

inline void save_table(const AlignedDataset& dataset, const std::string& table_path) {
  write_text(table_path, table_to_csv(dataset));
}

inline void save_dataset(const AlignedDataset& dataset, const std::string& table_path,
                         const std::string& embeddings_path) {
  save_table(dataset, table_path);
  xmeb::write(embeddings_path, dataset.embeddings());
}

// ---------------------------------------------------------------------------

struct ColumnStats {
  std::string column;
  std::size_t distinct_count = 0;
  std::map<std::string, std::size_t> frequencies;

  // Values by descending count, ties by value.
  std::vector<std::pair<std::string, std::size_t>> sorted_frequencies() const {
    std::vector<std::pair<std::string, std::size_t>> out(frequencies.begin(), frequencies.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
  }
};

inline ColumnStats column_stats(const AlignedDataset& dataset, std::string_view column) {
  const std::size_t col = dataset.column_index(column);
  ColumnStats stats{.column = std::string(column)};
  for (const auto& t : dataset.tuples()) ++stats.frequencies[t[col]];
  stats.distinct_count = stats.frequencies.size();
  return stats;
}

inline std::vector<std::string> distinct_values(const AlignedDataset& dataset, std::string_view column) {
  std::vector<std::string> values;
  for (const auto& [value, count] : column_stats(dataset, column).frequencies) values.push_back(value);
  return values;
}

// ---------------------------------------------------------------------------

struct PropagatedCell {
  std::string column;
  std::string original;
  std::string replacement;
  friend bool operator==(const PropagatedCell&, const PropagatedCell&) = default;
};

// One injected error: the observed value `injected` replaced the true value
// `original` in (row, column).
struct CellError {
  RowId row = 0;
  std::string column;
  std::string original;
  std::string injected;
  std::vector<PropagatedCell> propagated;
  friend bool operator==(const CellError&, const CellError&) = default;
};

class ErrorMask {
 public:
  ErrorMask() = default;
  explicit ErrorMask(std::vector<CellError> entries) : entries_(std::move(entries)) {
    std::set<RowId> rows;
    for (const auto& e : entries_) {
      if (e.injected == e.original) {
        throw ParseError("mask entry for row " + std::to_string(e.row) + " injects its original value");
      }
      if (!rows.insert(e.row).second) {
        throw ParseError("mask has more than one entry for row " + std::to_string(e.row));
      }
    }
  }

  const std::vector<CellError>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Checks propagated cells reference free-text columns of `dataset` and rows exist.
  void check_against(const AlignedDataset& dataset) const {
    for (const auto& e : entries_) {
      if (e.row >= dataset.size()) throw UnknownRowId("mask references row " + std::to_string(e.row));
      dataset.column_index(e.column);
      for (const auto& p : e.propagated) {
        if (dataset.column(p.column).kind != ColumnKind::free_text) {
          throw SchemaError("propagated cell in non free-text column '" + p.column + "'");
        }
      }
    }
  }

  friend bool operator==(const ErrorMask&, const ErrorMask&) = default;

 private:
  std::vector<CellError> entries_;
};

inline std::set<RowId> erroneous_rows(const ErrorMask& mask) {
  std::set<RowId> rows;
  for (const auto& e : mask.entries()) rows.insert(e.row);
  return rows;
}

inline nlohmann::json to_json(const ErrorMask& mask) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : mask.entries()) {
    nlohmann::json propagated = nlohmann::json::array();
    for (const auto& p : e.propagated) {
      propagated.push_back({{"column", p.column}, {"original", p.original}, {"new", p.replacement}});
    }
    entries.push_back({{"row", e.row},
                       {"column", e.column},
                       {"original", e.original},
                       {"injected", e.injected},
                       {"propagated", std::move(propagated)}});
  }
  return {{"entries", std::move(entries)}};
}

inline ErrorMask mask_from_json(const nlohmann::json& doc) {
  try {
    std::vector<CellError> entries;
    for (const auto& e : doc.at("entries")) {
      CellError entry{.row = e.at("row").get<RowId>(),
                      .column = e.at("column").get<std::string>(),
                      .original = e.at("original").get<std::string>(),
                      .injected = e.at("injected").get<std::string>()};
      if (e.contains("propagated")) {
        for (const auto& p : e["propagated"]) {
          entry.propagated.push_back({p.at("column").get<std::string>(), p.at("original").get<std::string>(),
                                      p.at("new").get<std::string>()});
        }
      }
      entries.push_back(std::move(entry));
    }
    return ErrorMask(std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed error mask: ") + e.what());
  }
}

inline ErrorMask load_mask(const std::string& path) { return mask_from_json(read_json(path)); }

inline void save_mask(const ErrorMask& mask, const std::string& path) {
  write_text(path, to_json(mask).dump(2) + "\n");
}

}  // namespace xmodal
