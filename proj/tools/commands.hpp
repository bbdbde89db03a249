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

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmodal/xmodal.hpp"

namespace xmodal::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3 };

struct RunConfig {
  std::string table;
  std::string embeddings;
  std::string schema;
  std::string mask;
  std::string clean_table;
  std::string clean_embeddings;
  std::string flags;
  std::string probabilities;  // directory of <column>.csv probability files
  std::string modality = "image";
  std::string detector = "cl";
  std::size_t k = 5;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double row_fraction = 0.5;
  bool enforce_observed_pairs = true;
  std::vector<std::string> columns;
  std::vector<std::string> propagation_columns;
  std::string out = ".";
};

namespace fs = std::filesystem;

inline std::optional<std::string> optional_path(const std::string& p) {
  return p.empty() ? std::nullopt : std::optional<std::string>(p);
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + flag);
}

inline std::string out_path(const RunConfig& cfg, const std::string& file) {
  fs::create_directories(cfg.out);
  return (fs::path(cfg.out) / file).string();
}

// Column names may contain anything; keep file names portable.
inline std::string file_stem(const std::string& column) {
  std::string s;
  for (char c : column) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return s;
}

inline AlignedDataset load_input(const RunConfig& cfg) {
  require(cfg.table, "--table");
  require(cfg.embeddings, "--embeddings");
  return load_dataset(cfg.table, cfg.embeddings, optional_path(cfg.schema));
}

// ---------------------------------------------------------------------------

inline int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  const AlignedDataset ds = load_input(cfg);
  nlohmann::json doc = {{"rows", ds.size()}, {"dimension", ds.dimension()}, {"columns", nlohmann::json::array()}};
  std::vector<std::vector<std::string>> rows = {{"Column", "Kind", "#Distinct", "Top values"}};
  for (const auto& c : ds.columns()) {
    const auto stats = column_stats(ds, c.name);
    const auto sorted = stats.sorted_frequencies();
    nlohmann::json freq = nlohmann::json::array();
    std::string top;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      freq.push_back({sorted[i].first, sorted[i].second});
      if (i < 3) top += (i ? ", " : "") + sorted[i].first + " (" + std::to_string(sorted[i].second) + ")";
    }
    if (sorted.size() > 3) top += ", ...";
    doc["columns"].push_back({{"name", c.name},
                              {"kind", std::string(to_string(c.kind))},
                              {"distinct", stats.distinct_count},
                              {"frequencies", std::move(freq)}});
    rows.push_back({c.name, std::string(to_string(c.kind)), std::to_string(stats.distinct_count), top});
  }
  const std::string text = eval::render_table(rows);
  write_text(out_path(cfg, "stats.json"), doc.dump(2) + "\n");
  write_text(out_path(cfg, "stats.txt"), text);
  out << text;
  return kOk;
}

inline int cmd_inject(const RunConfig& cfg, std::ostream& out) {
  const AlignedDataset ds = load_input(cfg);
  corrupt::CorruptionConfig config = corrupt::CorruptionConfig::defaults_for(ds);
  config.row_fraction = cfg.row_fraction;
  config.seed = cfg.seed;
  config.enforce_observed_pairs = cfg.enforce_observed_pairs;
  if (!cfg.columns.empty()) config.eligible_columns = cfg.columns;
  if (!cfg.propagation_columns.empty()) config.propagation_columns = cfg.propagation_columns;

  const auto result = corrupt::inject_errors(ds, config);
  save_table(result.dataset, out_path(cfg, "corrupted.csv"));
  save_mask(result.mask, out_path(cfg, "mask.json"));
  write_text(out_path(cfg, "corruption_config.json"), corrupt::to_json(config).dump(2) + "\n");
  out << "injected " << result.mask.size() << " errors into " << ds.size() << " rows\n";
  return kOk;
}

// Default detection targets: categorical columns with at least two values.
inline std::vector<std::string> detection_columns(const RunConfig& cfg, const AlignedDataset& ds) {
  if (!cfg.columns.empty()) return cfg.columns;
  std::vector<std::string> cols;
  for (const auto& c : ds.columns()) {
    if (c.is_categorical() && column_stats(ds, c.name).distinct_count >= 2) cols.push_back(c.name);
  }
  return cols;
}

inline int cmd_detect(const RunConfig& cfg, std::ostream& out) {
  if (cfg.detector != "cl" && cfg.detector != "shapley") {
    throw ConfigError("unknown detector '" + cfg.detector + "' (expected cl or shapley)");
  }
  const auto modality = predict::parse_modality(cfg.modality);
  const AlignedDataset ds = load_input(cfg);
  std::optional<AlignedDataset> clean;
  if (cfg.detector == "shapley") {
    require(cfg.clean_table, "--clean-table");
    require(cfg.clean_embeddings, "--clean-embeddings");
    clean = load_dataset(cfg.clean_table, cfg.clean_embeddings, optional_path(cfg.schema));
  }

  eval::ColumnFlags flags;
  nlohmann::json repairs = nlohmann::json::array();
  for (const auto& column : detection_columns(cfg, ds)) {
    nlohmann::json report;
    if (cfg.detector == "cl") {
      const predict::ProbabilityMatrix probs = [&] {
        if (!cfg.probabilities.empty()) {
          return predict::load_probabilities((fs::path(cfg.probabilities) / (column + ".csv")).string(), column, ds);
        }
        const auto view = predict::build_features(ds, column, modality);
        auto estimate = predict::knn_oos_probabilities(view, cfg.k, cfg.folds, cfg.seed);
        for (const auto& w : estimate.warnings) std::cerr << "warning: " << column << ": " << w << '\n';
        return std::move(estimate.probabilities);
      }();
      const auto issues = cl::find_label_issues(probs, column);
      flags[column] = issues.flagged_rows();
      for (const auto& [row, value] : cl::suggest_repairs(issues)) {
        repairs.push_back({{"row", row}, {"column", column}, {"value", value}});
      }
      report = cl::to_json(issues);
    } else {
      const AlignedDataset* both[] = {&ds, &*clean};
      const auto encoder = predict::FeatureEncoder::fit(both, column, modality);
      const auto dirty_view = encoder.transform(ds);
      const auto clean_view = encoder.transform(*clean);
      const shapley::ValuationInput input{{dirty_view.features, dirty_view.labels},
                                          {clean_view.features, clean_view.labels}};
      const auto result = shapley::knn_shapley(input);
      flags[column] = result.flagged;
      report = shapley::to_json(result, column);
    }
    write_text(out_path(cfg, "report_" + file_stem(column) + ".json"), report.dump(2) + "\n");
    out << column << ": " << flags[column].size() << " flagged\n";
  }

  nlohmann::json columns = nlohmann::json::object();
  for (const auto& [column, rows] : flags) columns[column] = std::vector<RowId>(rows.begin(), rows.end());
  const auto tuples = eval::tuple_level_prediction(flags);
  const nlohmann::json doc = {{"detector", cfg.detector},
                              {"modality", cfg.modality},
                              {"n", ds.size()},
                              {"schema_columns", ds.column_names()},
                              {"columns", std::move(columns)},
                              {"tuple_flags", std::vector<RowId>(tuples.begin(), tuples.end())},
                              {"repairs", std::move(repairs)}};
  write_text(out_path(cfg, "flags.json"), doc.dump(2) + "\n");
  out << "tuple-level: " << tuples.size() << " flagged of " << ds.size() << '\n';
  return kOk;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  require(cfg.flags, "--flags");
  require(cfg.mask, "--mask");
  const nlohmann::json doc = read_json(cfg.flags);
  const ErrorMask mask = load_mask(cfg.mask);
  eval::ColumnFlags flags;
  std::map<eval::CellKey, std::string> repairs;
  std::size_t n = 0;
  std::vector<std::string> schema_columns;
  std::string modality;
  try {
    n = doc.at("n").get<std::size_t>();
    schema_columns = doc.at("schema_columns").get<std::vector<std::string>>();
    modality = doc.value("modality", "");
    for (const auto& [column, rows] : doc.at("columns").items()) {
      const auto ids = rows.get<std::vector<RowId>>();
      flags[column] = std::set<RowId>(ids.begin(), ids.end());
    }
    for (const auto& r : doc.value("repairs", nlohmann::json::array())) {
      repairs[{r.at("row").get<RowId>(), r.at("column").get<std::string>()}] = r.at("value").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cfg.flags + ": " + e.what());
  }

  const auto report = eval::per_column_metrics(flags, mask, n, schema_columns, modality);
  std::string text = eval::render_metrics_table(report);
  nlohmann::json metrics = {{"detection", eval::to_json(report)}};
  if (!repairs.empty()) {
    const auto repair = eval::repair_accuracy(repairs, mask);
    metrics["repair"] = eval::to_json(repair);
    text += "\n" + eval::render_repair_table(repair);
  }
  write_text(out_path(cfg, "metrics.json"), metrics.dump(2) + "\n");
  write_text(out_path(cfg, "metrics.txt"), text);
  out << text;
  return kOk;
}

// ---------------------------------------------------------------------------

// Values from a JSON config file fill every option not given on the command line.
inline void apply_config_file(const std::string& path, const CLI::App& sub, RunConfig& cfg) {
  const nlohmann::json doc = [&] {
    try {
      return read_json(path);
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }();
  auto given = [&](const char* flag) {
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  auto set = [&](const char* key, const char* flag, auto& field) {
    if (!doc.contains(key) || given(flag)) return;
    try {
      doc.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": bad value for '" + key + "': " + e.what());
    }
  };
  set("table", "--table", cfg.table);
  set("embeddings", "--embeddings", cfg.embeddings);
  set("schema", "--schema", cfg.schema);
  set("mask", "--mask", cfg.mask);
  set("clean_table", "--clean-table", cfg.clean_table);
  set("clean_embeddings", "--clean-embeddings", cfg.clean_embeddings);
  set("flags", "--flags", cfg.flags);
  set("probabilities", "--probabilities", cfg.probabilities);
  set("modality", "--modality", cfg.modality);
  set("detector", "--detector", cfg.detector);
  set("k", "--k", cfg.k);
  set("folds", "--folds", cfg.folds);
  set("seed", "--seed", cfg.seed);
  set("row_fraction", "--row-fraction", cfg.row_fraction);
  set("enforce_observed_pairs", "--enforce-observed-pairs", cfg.enforce_observed_pairs);
  set("eligible_columns", "--columns", cfg.columns);
  set("propagation_columns", "--propagation", cfg.propagation_columns);
  set("out", "--out", cfg.out);
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Inject, detect, repair and score cross-modal errors in image-aligned tables", "xmodal"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file with run settings");
    sub->add_option("--out", cfg.out, "Output directory");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--table", cfg.table, "CSV table (header row first)");
    sub->add_option("--embeddings", cfg.embeddings, "XMEB embedding file aligned with the table rows");
    sub->add_option("--schema", cfg.schema, "JSON schema with column kinds and groups");
  };

  CLI::App* stats = app.add_subcommand("stats", "Distinct counts and value frequencies per column");
  add_common(stats);
  add_data(stats);

  CLI::App* inject = app.add_subcommand("inject", "Inject cross-modal errors into a clean table");
  add_common(inject);
  add_data(inject);
  inject->add_option("--row-fraction", cfg.row_fraction, "Fraction of rows to corrupt");
  inject->add_option("--seed", cfg.seed, "Random seed");
  inject->add_option("--columns", cfg.columns, "Eligible categorical columns")->delimiter(',');
  inject->add_option("--propagation", cfg.propagation_columns, "Free-text columns rewritten with the injected value")
      ->delimiter(',');
  inject->add_option("--enforce-observed-pairs", cfg.enforce_observed_pairs,
                     "Keep correlated columns within observed value pairs");

  CLI::App* detect = app.add_subcommand("detect", "Flag erroneous cells column by column");
  add_common(detect);
  add_data(detect);
  detect->add_option("--modality", cfg.modality, "Feature modality")->check(CLI::IsMember({"table", "image", "both"}));
  detect->add_option("--detector", cfg.detector, "Detector")->check(CLI::IsMember({"cl", "shapley"}));
  detect->add_option("--k", cfg.k, "Neighbours for the k-NN probability model")->check(CLI::PositiveNumber);
  detect->add_option("--folds", cfg.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
  detect->add_option("--seed", cfg.seed, "Fold assignment seed");
  detect->add_option("--columns", cfg.columns, "Columns to check (default: all categorical)")->delimiter(',');
  detect->add_option("--clean-table", cfg.clean_table, "Clean table used as validation data (shapley)");
  detect->add_option("--clean-embeddings", cfg.clean_embeddings, "Embeddings of the clean table (shapley)");
  detect->add_option("--probabilities", cfg.probabilities, "Directory of <column>.csv probability files (cl)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score flags and repairs against an error mask");
  add_common(evaluate);
  evaluate->add_option("--flags", cfg.flags, "flags.json written by detect");
  evaluate->add_option("--mask", cfg.mask, "Error mask written by inject");

  std::vector<const char*> argv;
  argv.push_back("xmodal");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) apply_config_file(config_path, *sub, cfg);
    if (sub == stats) return cmd_stats(cfg, out);
    if (sub == inject) return cmd_inject(cfg, out);
    if (sub == detect) return cmd_detect(cfg, out);
    return cmd_evaluate(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace xmodal::cli
