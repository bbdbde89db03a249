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
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/core.hpp"
#include "xmodal/matrix.hpp"
#include "xmodal/random.hpp"

namespace xmodal::predict {

enum class Modality { table_only, image_only, table_and_image };

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::table_only: return "table";
    case Modality::image_only: return "image";
    case Modality::table_and_image: return "both";
  }
  return "?";
}

inline Modality parse_modality(std::string_view text) {
  if (text == "table") return Modality::table_only;
  if (text == "image") return Modality::image_only;
  if (text == "both") return Modality::table_and_image;
  throw ConfigError("unknown modality '" + std::string(text) + "' (expected table, image or both)");
}

inline bool uses_table(Modality m) { return m != Modality::image_only; }
inline bool uses_image(Modality m) { return m != Modality::table_only; }

inline constexpr std::string_view kImageSource = "<image>";

// Where one feature column came from: a (column, value) one-hot slot or an
// embedding slot (column == kImageSource, detail = slot index).
struct FeatureSource {
  std::string column;
  std::string detail;
  friend bool operator==(const FeatureSource&, const FeatureSource&) = default;
};

struct FeatureView {
  Matrix features;
  std::vector<FeatureSource> provenance;
  std::string target_column;
  std::vector<std::string> excluded_columns;
  std::vector<std::string> class_index;  // sorted class values
  std::vector<std::size_t> labels;       // observed class per row

  std::size_t size() const { return features.rows(); }
  std::size_t num_classes() const { return class_index.size(); }
};

// One-hot vocabularies and the class index fitted on one or more datasets so
// that several tables (e.g. dirty and clean) share a feature space.
class FeatureEncoder {
 public:
  static FeatureEncoder fit(std::span<const AlignedDataset* const> datasets, std::string_view target,
                            Modality modality) {
    if (datasets.empty()) throw ConfigError("encoder needs at least one dataset");
    const AlignedDataset& first = *datasets.front();
    const ColumnSchema& target_schema = first.column(target);
    if (!target_schema.is_categorical()) {
      throw DegenerateTarget("target '" + std::string(target) + "' is not categorical");
    }
    FeatureEncoder enc;
    enc.target_ = std::string(target);
    enc.modality_ = modality;
    enc.dim_ = first.dimension();
    for (const auto& c : first.columns()) {
      if (c.name == target || !c.is_categorical()) {
        enc.excluded_.push_back(c.name);
        continue;
      }
      if (uses_table(modality)) enc.vocab_.emplace_back(c.name, std::vector<std::string>{});
    }
    std::set<std::string> classes;
    for (const AlignedDataset* ds : datasets) {
      if (ds->dimension() != enc.dim_) throw AlignmentError("datasets disagree on embedding dimension");
      const std::size_t t = ds->column_index(target);
      for (const auto& tuple : ds->tuples()) classes.insert(tuple[t]);
      for (auto& [name, values] : enc.vocab_) {
        const std::size_t col = ds->column_index(name);
        for (const auto& tuple : ds->tuples()) values.push_back(tuple[col]);
      }
    }
    for (auto& [name, values] : enc.vocab_) {
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
    }
    if (classes.size() < 2) {
      throw DegenerateTarget("target '" + std::string(target) + "' has fewer than two distinct values");
    }
    enc.classes_.assign(classes.begin(), classes.end());
    return enc;
  }

  static FeatureEncoder fit(const AlignedDataset& dataset, std::string_view target, Modality modality) {
    const AlignedDataset* one[] = {&dataset};
    return fit(one, target, modality);
  }

  std::size_t width() const {
    std::size_t w = uses_image(modality_) ? dim_ : 0;
    for (const auto& [name, values] : vocab_) w += values.size();
    return w;
  }

  const std::vector<std::string>& class_index() const { return classes_; }

  std::size_t class_of(const std::string& value) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), value);
    if (it == classes_.end() || *it != value) throw ClassMismatch("value '" + value + "' is not a known class");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  // One-hot blocks (scaled by 1/sqrt(2) so one categorical mismatch is at
  // distance 1) followed by the L2-normalised embedding.
  FeatureView transform(const AlignedDataset& dataset) const {
    static const double kOneHot = 1.0 / std::sqrt(2.0);
    FeatureView view;
    view.target_column = target_;
    view.excluded_columns = excluded_;
    view.class_index = classes_;
    view.features = Matrix(dataset.size(), width());

    std::vector<std::size_t> cols;
    for (const auto& [name, values] : vocab_) {
      cols.push_back(dataset.column_index(name));
      for (const auto& v : values) view.provenance.push_back({name, v});
    }
    if (uses_image(modality_)) {
      for (std::size_t s = 0; s < dim_; ++s) view.provenance.push_back({std::string(kImageSource), std::to_string(s)});
    }
    const std::size_t target_col = dataset.column_index(target_);
    view.labels.reserve(dataset.size());
    for (RowId r = 0; r < dataset.size(); ++r) {
      view.labels.push_back(class_of(dataset.cell(r, target_col)));
      auto out = view.features.row(r);
      std::size_t offset = 0;
      for (std::size_t b = 0; b < vocab_.size(); ++b) {
        const auto& values = vocab_[b].second;
        const auto it = std::lower_bound(values.begin(), values.end(), dataset.cell(r, cols[b]));
        if (it != values.end() && *it == dataset.cell(r, cols[b])) out[offset + (it - values.begin())] = kOneHot;
        offset += values.size();
      }
      if (uses_image(modality_)) {
        const auto emb = dataset.embedding(r);
        double norm = 0.0;
        for (float x : emb) norm += static_cast<double>(x) * x;
        norm = std::sqrt(norm);
        for (std::size_t s = 0; s < dim_; ++s) out[offset + s] = norm > 0.0 ? emb[s] / norm : 0.0;
      }
    }
    return view;
  }

 private:
  std::string target_;
  Modality modality_ = Modality::table_only;
  std::size_t dim_ = 0;
  std::vector<std::pair<std::string, std::vector<std::string>>> vocab_;
  std::vector<std::string> excluded_;
  std::vector<std::string> classes_;
};

inline FeatureView build_features(const AlignedDataset& dataset, std::string_view target, Modality modality) {
  return FeatureEncoder::fit(dataset, target, modality).transform(dataset);
}

// ---------------------------------------------------------------------------

// Row-stochastic matrix of class probabilities plus the observed labels.
class ProbabilityMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  ProbabilityMatrix(Matrix probabilities, std::vector<std::string> class_index, std::vector<std::size_t> labels)
      : p_(std::move(probabilities)), class_index_(std::move(class_index)), labels_(std::move(labels)) {
    validate();
  }

  std::size_t rows() const { return p_.rows(); }
  std::size_t num_classes() const { return p_.cols(); }
  double operator()(std::size_t r, std::size_t c) const { return p_(r, c); }
  std::span<const double> row(std::size_t r) const { return p_.row(r); }
  const Matrix& matrix() const { return p_; }
  const std::vector<std::string>& class_index() const { return class_index_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  std::size_t label(std::size_t r) const { return labels_[r]; }

 private:
  void validate() const {
    if (p_.cols() < 2) throw ClassMismatch("probability matrix needs at least two classes");
    if (class_index_.size() != p_.cols()) throw ClassMismatch("class index does not match matrix width");
    if (labels_.size() != p_.rows()) throw RowCountMismatch("label count does not match matrix rows");
    for (std::size_t r = 0; r < p_.rows(); ++r) {
      double sum = 0.0;
      for (double v : p_.row(r)) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("row " + std::to_string(r) + " has an entry outside [0, 1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw ParseError("row " + std::to_string(r) + " sums to " + std::to_string(sum));
      }
      if (labels_[r] >= p_.cols()) throw ClassMismatch("row " + std::to_string(r) + " has an invalid label");
    }
  }

  Matrix p_;
  std::vector<std::string> class_index_;
  std::vector<std::size_t> labels_;
};

struct KnnEstimate {
  ProbabilityMatrix probabilities;
  std::vector<std::string> warnings;  // classes missing from some training folds
};

// Stratified fold assignment: each class's members are shuffled and dealt
// round-robin, continuing the deal from where the previous class stopped.
inline std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t num_classes,
                                                 std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (labels.size() < folds) {
    throw TooFewRows(std::to_string(labels.size()) + " rows cannot fill " + std::to_string(folds) + " folds");
  }
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t r = 0; r < labels.size(); ++r) members.at(labels[r]).push_back(r);
  SplitMix64 rng(seed);
  std::vector<std::size_t> fold_of(labels.size());
  std::size_t dealt = 0;
  for (auto& rows : members) {
    rng.shuffle(rows);
    for (std::size_t r : rows) fold_of[r] = dealt++ % folds;
  }
  return fold_of;
}

namespace detail {

// Smoothed k-NN vote: (votes_j + prior_j) / (k + 1) where prior_j is the
// add-one class frequency of the reference rows.
inline void knn_vote(const Matrix& reference, std::span<const std::size_t> reference_labels,
                     std::span<const std::size_t> reference_rows, std::span<const double> query,
                     std::span<const double> prior, std::size_t k, std::span<double> out) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(reference_rows.size());
  for (std::size_t r : reference_rows) dist.emplace_back(squared_distance(reference.row(r), query), r);
  const std::size_t kk = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < kk; ++i) out[reference_labels[dist[i].second]] += 1.0;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (out[j] + prior[j]) / (static_cast<double>(kk) + 1.0);
}

inline std::vector<double> smoothed_prior(std::span<const std::size_t> labels, std::span<const std::size_t> rows,
                                          std::size_t num_classes) {
  std::vector<double> prior(num_classes, 1.0);
  for (std::size_t r : rows) prior[labels[r]] += 1.0;
  const double total = static_cast<double>(rows.size() + num_classes);
  for (double& p : prior) p /= total;
  return prior;
}

}  // namespace detail

// Out-of-sample probabilities under an explicit fold assignment: a row's
// estimate only looks at rows in other folds. Distance ties go to the lower
// row index.
inline KnnEstimate knn_oos_probabilities(const FeatureView& view, std::size_t k,
                                         std::span<const std::size_t> fold_of) {
  if (k == 0) throw ConfigError("k must be positive");
  const std::size_t n = view.size();
  const std::size_t m = view.num_classes();
  if (fold_of.size() != n) throw RowCountMismatch("fold assignment does not cover every row");
  const std::size_t folds = n == 0 ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;

  Matrix probs(n, m);
  std::vector<std::string> warnings;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, held_out;
    for (std::size_t r = 0; r < n; ++r) (fold_of[r] == f ? held_out : train).push_back(r);
    if (held_out.empty()) continue;
    if (train.empty()) throw TooFewRows("fold " + std::to_string(f) + " leaves no training rows");
    const auto prior = detail::smoothed_prior(view.labels, train, m);
    std::vector<std::size_t> present(m, 0);
    for (std::size_t r : train) ++present[view.labels[r]];
    for (std::size_t j = 0; j < m; ++j) {
      if (present[j] == 0) {
        warnings.push_back("fold " + std::to_string(f) + ": class '" + view.class_index[j] +
                           "' absent from training folds, using smoothed prior");
      }
    }
    for (std::size_t r : held_out) {
      detail::knn_vote(view.features, view.labels, train, view.features.row(r), prior, k, probs.row(r));
    }
  }
  return {ProbabilityMatrix(std::move(probs), view.class_index, view.labels), std::move(warnings)};
}

inline KnnEstimate knn_oos_probabilities(const FeatureView& view, std::size_t k, std::size_t folds,
                                         std::uint64_t seed) {
  const auto fold_of = stratified_folds(view.labels, view.num_classes(), folds, seed);
  return knn_oos_probabilities(view, k, fold_of);
}

// Probabilities for `query` rows from k-NN votes over a separate reference
// set (e.g. clean training rows); out-of-sample by construction. Both views
// must come from the same FeatureEncoder.
inline ProbabilityMatrix knn_reference_probabilities(const FeatureView& reference, const FeatureView& query,
                                                     std::size_t k) {
  if (k == 0) throw ConfigError("k must be positive");
  if (reference.size() == 0) throw TooFewRows("reference set is empty");
  if (reference.features.cols() != query.features.cols() || reference.class_index != query.class_index) {
    throw ClassMismatch("reference and query views come from different encoders");
  }
  std::vector<std::size_t> rows(reference.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto prior = detail::smoothed_prior(reference.labels, rows, reference.num_classes());
  Matrix probs(query.size(), query.num_classes());
  for (std::size_t r = 0; r < query.size(); ++r) {
    detail::knn_vote(reference.features, reference.labels, rows, query.features.row(r), prior, k, probs.row(r));
  }
  return ProbabilityMatrix(std::move(probs), query.class_index, query.labels);
}

// ---------------------------------------------------------------------------

inline constexpr double kFileRowSumTolerance = 1e-6;

// Reads externally produced probabilities: a header of class names, then one
// row of decimals per table row. Rows are renormalised after the sum check.
inline ProbabilityMatrix load_probabilities(const std::string& path, std::string_view labels_column,
                                            const AlignedDataset& dataset) {
  auto records = csv::read(path);
  if (records.empty()) throw ParseError(path + ": missing header row");
  std::vector<std::string> classes = records.front();
  {
    std::set<std::string> unique(classes.begin(), classes.end());
    if (unique.size() != classes.size()) throw ParseError(path + ": duplicate class name in header");
  }
  if (classes.size() < 2) throw ParseError(path + ": need at least two classes");
  const std::size_t n = records.size() - 1;
  if (n != dataset.size()) {
    throw RowCountMismatch(path + ": " + std::to_string(n) + " probability rows for " +
                           std::to_string(dataset.size()) + " table rows");
  }
  const std::size_t m = classes.size();
  Matrix probs(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    const std::string where = path + ": row " + std::to_string(r + 1);
    if (rec.size() != m) throw ParseError(where + " has " + std::to_string(rec.size()) + " fields");
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double v = 0.0;
      const char* begin = rec[j].data();
      const char* end = begin + rec[j].size();
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw ParseError(where + ": '" + rec[j] + "' is not a number");
      }
      if (v < 0.0 || v > 1.0) throw ParseError(where + ": probability outside [0, 1]");
      probs(r, j) = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > kFileRowSumTolerance) {
      throw ParseError(where + " sums to " + std::to_string(sum));
    }
    for (std::size_t j = 0; j < m; ++j) probs(r, j) /= sum;
  }
  const std::size_t col = dataset.column_index(labels_column);
  std::vector<std::size_t> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto it = std::find(classes.begin(), classes.end(), dataset.cell(r, col));
    if (it == classes.end()) {
      throw ClassMismatch(path + ": label '" + dataset.cell(r, col) + "' of row " + std::to_string(r) +
                          " is not in the header");
    }
    labels[r] = static_cast<std::size_t>(it - classes.begin());
  }
  return ProbabilityMatrix(std::move(probs), std::move(classes), std::move(labels));
}

}  // namespace xmodal::predict
