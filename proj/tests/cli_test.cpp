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

#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "test_support.hpp"

namespace xmodal::cli {
namespace {

using xmodal::testing::TempDir;

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

// Writes a clustered dataset (table, embeddings, schema) under `dir` with the given prefix.
void write_clusters(const TempDir& dir, const std::string& prefix, const AlignedDataset& ds) {
  save_dataset(ds, dir.file(prefix + ".csv"), dir.file(prefix + ".xmeb"));
  write_text(dir.file("schema.json"), schema_to_json(ds.columns()).dump(2));
}

std::vector<std::string> inputs(const TempDir& dir, const std::string& prefix) {
  return {"--table", dir.file(prefix + ".csv"), "--embeddings", dir.file(prefix + ".xmeb"), "--schema",
          dir.file("schema.json"), "--out", dir.path().string()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST(CliStatsTest, FashionSample) {
  TempDir dir;
  xmeb::write(dir.file("emb.xmeb"), Embeddings(10, 2, std::vector<float>(20, 0.5f)));
  const auto r = invoke({"stats", "--table", std::string(XMODAL_TEST_DATA) + "/fashion_sample.csv", "--embeddings",
                         dir.file("emb.xmeb"), "--schema", std::string(XMODAL_TEST_DATA) + "/fashion_schema.json",
                         "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir.file("stats.json"));
  EXPECT_EQ(doc["rows"], 10);
  bool seen = false;
  for (const auto& c : doc["columns"]) {
    if (c["name"] != "Gender") continue;
    seen = true;
    EXPECT_EQ(c["distinct"], 4);
    EXPECT_EQ(c["frequencies"][0][0], "Girls");  // tied with Men, broken by value
    EXPECT_EQ(c["frequencies"][0][1], 3);
  }
  EXPECT_TRUE(seen);
  EXPECT_NE(r.out.find("Gender"), std::string::npos);
  EXPECT_EQ(xmodal::testing::read_file(dir.file("stats.txt")), r.out);
}

TEST(CliInjectTest, HalfOfRows) {
  TempDir dir;
  const auto ds = xmodal::testing::gaussian_clusters(100, 4, 4, 3.0, 0.5, 1);
  write_clusters(dir, "clean", ds);
  const auto r = invoke(concat({"inject", "--row-fraction", "0.5", "--seed", "3"}, inputs(dir, "clean")));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mask = load_mask(dir.file("mask.json"));
  EXPECT_EQ(mask.size(), 50u);
  const auto dirty = load_dataset(dir.file("corrupted.csv"), dir.file("clean.xmeb"), dir.file("schema.json"));
  mask.check_against(dirty);
  const auto rows = erroneous_rows(mask);
  for (RowId i = 0; i < ds.size(); ++i) {
    if (!rows.contains(i)) {
      EXPECT_EQ(dirty.tuple(i), ds.tuple(i)) << "row " << i;
    }
  }
  for (const auto& e : mask.entries()) {
    if (e.column == "Label") {
      EXPECT_EQ(dirty.cell(e.row, "Title"), "Acme " + e.injected + " Shoe");
    }
  }
  EXPECT_TRUE(fs::exists(dir.file("corruption_config.json")));
}

TEST(CliInjectTest, ZeroFractionWritesEmptyMask) {
  TempDir dir;
  write_clusters(dir, "clean", xmodal::testing::gaussian_clusters(20, 2, 2, 3.0, 0.5, 1));
  const auto r = invoke(concat({"inject", "--row-fraction", "0"}, inputs(dir, "clean")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_mask(dir.file("mask.json")).size(), 0u);
}

TEST(CliInjectTest, ExitCodes) {
  TempDir dir;
  auto ds = xmodal::testing::gaussian_clusters(20, 1, 2, 3.0, 0.5, 1);  // one label value
  write_clusters(dir, "clean", ds);
  EXPECT_EQ(invoke(concat({"inject", "--columns", "Label"}, inputs(dir, "clean"))).code, 3);
  EXPECT_EQ(invoke(concat({"inject", "--row-fraction", "1.5"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke(concat({"inject", "--columns", "Nope"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke({"inject", "--table", dir.file("missing.csv"), "--embeddings", dir.file("clean.xmeb")}).code, 3);
  EXPECT_EQ(invoke({"inject", "--bogus"}).code, 2);
}

TEST(CliDetectTest, PerfectProbabilitiesFlagNothing) {
  TempDir dir;
  const auto ds = xmodal::testing::gaussian_clusters(12, 3, 3, 3.0, 0.5, 1);
  write_clusters(dir, "clean", ds);
  fs::create_directory(dir.path() / "probs");
  std::string text = "Blue,Green,Red\n";
  for (RowId i = 0; i < ds.size(); ++i) {
    const std::string& v = ds.cell(i, "Label");
    text += std::string(v == "Blue" ? "1" : "0") + "," + (v == "Green" ? "1" : "0") + "," + (v == "Red" ? "1" : "0") +
            "\n";
  }
  write_text((dir.path() / "probs" / "Label.csv").string(), text);
  const auto r = invoke(concat({"detect", "--detector", "cl", "--columns", "Label", "--probabilities",
                                (dir.path() / "probs").string()},
                               inputs(dir, "clean")));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto flags = read_json(dir.file("flags.json"));
  EXPECT_TRUE(flags["columns"]["Label"].empty());
  EXPECT_TRUE(flags["tuple_flags"].empty());
  EXPECT_EQ(flags["n"], 12);
}

TEST(CliDetectTest, ShapleyFlagsCorruptedTuple) {
  TempDir dir;
  const auto clean = xmodal::testing::gaussian_clusters(20, 2, 2, 6.0, 0.5, 2);
  auto tuples = clean.tuples();
  tuples[4][0] = tuples[4][0] == "Red" ? "Green" : "Red";
  const AlignedDataset dirty = clean.with_tuples(tuples);
  write_clusters(dir, "clean", clean);
  save_table(dirty, dir.file("dirty.csv"));
  const auto r = invoke(concat({"detect", "--detector", "shapley", "--columns", "Label", "--clean-table",
                                dir.file("clean.csv"), "--clean-embeddings", dir.file("clean.xmeb")},
                               {"--table", dir.file("dirty.csv"), "--embeddings", dir.file("clean.xmeb"), "--schema",
                                dir.file("schema.json"), "--out", dir.path().string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto flags = read_json(dir.file("flags.json"));
  const auto rows = flags["columns"]["Label"].get<std::vector<RowId>>();
  EXPECT_NE(std::find(rows.begin(), rows.end(), 4u), rows.end());
  const auto report = read_json(dir.file("report_Label.json"));
  double lowest = 0.0;
  RowId lowest_row = 0;
  for (const auto& v : report["shapley"]) {
    if (v["value"].get<double>() < lowest) {
      lowest = v["value"].get<double>();
      lowest_row = v["row"].get<RowId>();
    }
  }
  EXPECT_EQ(lowest_row, 4u);
}

TEST(CliDetectTest, ConfigErrors) {
  TempDir dir;
  write_clusters(dir, "clean", xmodal::testing::gaussian_clusters(20, 2, 2, 3.0, 0.5, 1));
  EXPECT_EQ(invoke(concat({"detect", "--detector", "forest"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke(concat({"detect", "--modality", "audio"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke(concat({"detect", "--folds", "1"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke(concat({"detect", "--detector", "shapley"}, inputs(dir, "clean"))).code, 2);
  EXPECT_EQ(invoke({"detect"}).code, 2);
}

TEST(CliPipelineTest, EvaluateIsDeterministic) {
  TempDir dir;
  write_clusters(dir, "clean", xmodal::testing::gaussian_clusters(80, 4, 4, 4.0, 0.5, 7));
  ASSERT_EQ(invoke(concat({"inject", "--row-fraction", "0.25", "--seed", "1"}, inputs(dir, "clean"))).code, 0);
  const std::vector<std::string> dirty = {"--table", dir.file("corrupted.csv"), "--embeddings", dir.file("clean.xmeb"),
                                          "--schema", dir.file("schema.json"), "--out", dir.path().string()};
  ASSERT_EQ(invoke(concat({"detect", "--columns", "Label"}, dirty)).code, 0);
  const std::vector<std::string> eval_args = {"evaluate", "--flags", dir.file("flags.json"), "--mask",
                                              dir.file("mask.json"), "--out", dir.path().string()};
  const auto first = invoke(eval_args);
  ASSERT_EQ(first.code, 0) << first.err;
  const std::string json1 = xmodal::testing::read_file(dir.file("metrics.json"));
  const std::string text1 = xmodal::testing::read_file(dir.file("metrics.txt"));
  const auto second = invoke(eval_args);
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(xmodal::testing::read_file(dir.file("metrics.json")), json1);
  EXPECT_EQ(xmodal::testing::read_file(dir.file("metrics.txt")), text1);
  EXPECT_EQ(first.out, second.out);
  EXPECT_NE(text1.find("Tuple"), std::string::npos);
  const auto metrics = read_json(dir.file("metrics.json"));
  EXPECT_TRUE(metrics.contains("repair"));

  write_text(dir.file("bad_flags.json"), R"({"n": 80, "schema_columns": ["Label", "Other", "Title"], "columns": {"Label": [80]}})");
  EXPECT_EQ(invoke({"evaluate", "--flags", dir.file("bad_flags.json"), "--mask", dir.file("mask.json"), "--out",
                    dir.path().string()})
                .code,
            3);
}

TEST(CliConfigTest, CommandLineOverridesFile) {
  TempDir dir;
  write_clusters(dir, "clean", xmodal::testing::gaussian_clusters(100, 4, 2, 3.0, 0.5, 1));
  nlohmann::json cfg = {{"table", dir.file("clean.csv")},
                        {"embeddings", dir.file("clean.xmeb")},
                        {"schema", dir.file("schema.json")},
                        {"row_fraction", 0.25},
                        {"seed", 9},
                        {"out", dir.path().string()}};
  write_text(dir.file("run.json"), cfg.dump());
  ASSERT_EQ(invoke({"inject", "--config", dir.file("run.json")}).code, 0);
  EXPECT_EQ(load_mask(dir.file("mask.json")).size(), 25u);
  ASSERT_EQ(invoke({"inject", "--config", dir.file("run.json"), "--row-fraction", "0.1"}).code, 0);
  EXPECT_EQ(load_mask(dir.file("mask.json")).size(), 10u);
  const auto written = read_json(dir.file("corruption_config.json"));
  EXPECT_EQ(written["seed"], 9);

  write_text(dir.file("broken.json"), "{not json");
  EXPECT_EQ(invoke({"inject", "--config", dir.file("broken.json")}).code, 2);
  write_text(dir.file("typed.json"), R"({"row_fraction": "lots"})");
  EXPECT_EQ(invoke({"inject", "--config", dir.file("typed.json")}).code, 2);
}

}  // namespace
}  // namespace xmodal::cli
