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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xmodal/core.hpp"
#include "xmodal/random.hpp"

namespace xmodal::testing {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "xmodal-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) { return csv::read_file(path); }

inline std::vector<ColumnSchema> categorical(const std::vector<std::string>& names) {
  std::vector<ColumnSchema> cols;
  for (const auto& n : names) cols.push_back(ColumnSchema{.name = n});
  return cols;
}

// Dataset with constant embeddings of dimension `dim`.
inline AlignedDataset make_dataset(std::vector<ColumnSchema> columns, std::vector<AlignedDataset::Tuple> tuples,
                                   std::size_t dim = 2) {
  const std::size_t n = tuples.size();
  return AlignedDataset(std::move(columns), std::move(tuples), Embeddings(n, dim, std::vector<float>(n * dim, 1.0f)));
}

// Rows of class c = i % classes get an embedding drawn around mean
// `separation * e_c` with isotropic noise `sigma`. Column "Label" holds the
// class name, "Other" a value independent of the class, "Title" a free-text
// field mentioning the label.
inline AlignedDataset gaussian_clusters(std::size_t n, std::size_t classes, std::size_t dim, double separation,
                                        double sigma, std::uint64_t seed) {
  static const char* kNames[] = {"Red", "Green", "Blue", "Black", "White", "Pink", "Grey", "Navy"};
  SplitMix64 rng(seed);
  std::vector<AlignedDataset::Tuple> tuples;
  std::vector<float> values;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    const std::string label = kNames[c];
    const std::string other = "o" + std::to_string(rng.uniform(3));
    tuples.push_back({label, other, "Acme " + label + " Shoe"});
    for (std::size_t d = 0; d < dim; ++d) {
      const double mean = d == c ? separation : 0.0;
      values.push_back(static_cast<float>(mean + sigma * rng.normal()));
    }
  }
  std::vector<ColumnSchema> cols = {
      {.name = "Label"}, {.name = "Other"}, {.name = "Title", .kind = ColumnKind::free_text, .propagation_target = true}};
  return AlignedDataset(std::move(cols), std::move(tuples), Embeddings(n, dim, std::move(values)));
}

inline std::vector<ColumnSchema> product_columns() {
  return {{.name = "Category", .correlated_group = "taxonomy"},
          {.name = "SubCategory", .correlated_group = "taxonomy"},
          {.name = "Color"},
          {.name = "Title", .kind = ColumnKind::free_text, .propagation_target = true}};
}

// 200 rows with a taxonomy whose valid pairs are a strict subset of the
// product of both columns, and titles mentioning the colour.
inline AlignedDataset product_dataset(std::size_t n = 200) {
  const std::vector<std::pair<std::string, std::string>> taxonomy = {
      {"Footwear", "Shoes"}, {"Footwear", "Sandals"}, {"Apparel", "Topwear"}, {"Apparel", "Dress"}, {"Accessories", "Bags"}};
  const std::vector<std::string> colors = {"Blue", "Red", "Black", "White", "Navy Blue"};
  std::vector<AlignedDataset::Tuple> tuples;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [cat, sub] = taxonomy[i % taxonomy.size()];
    const auto& color = colors[(i / 3) % colors.size()];
    tuples.push_back({cat, sub, color, "Brand " + color + " " + sub + (i % 4 == 0 ? " in " + color : "")});
  }
  return make_dataset(product_columns(), std::move(tuples), 3);
}

}  // namespace xmodal::testing
