// Copyright 2026 The ctxbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"
#include "ctxbench/evaluation.hpp"
#include "ctxbench/pipeline.hpp"

using namespace ctxbench;
namespace fs = std::filesystem;

namespace {

std::string fixture_config_json(const std::string& out_dir, uint64_t seed) {
  return R"({
    "out_dir": ")" + out_dir + R"(",
    "seed": )" + std::to_string(seed) + R"(,
    "time": {"t_hist": 11, "t_fut": 20, "dt": 0.1},
    "synth_counts": {"cruise": 14, "turn": 14, "stop_sign": 12, "crossing": 12,
                      "lead_trail": 10, "head_on": 10, "dense": 8, "sparse": 8,
                      "ped_cross": 55, "cyclist_lane": 55},
    "autoencoder": {"hidden": [24, 12], "latent": 6, "epochs": 8, "batch": 32,
                     "dec_clusters": 4, "lambda_dec": 0.1, "min_samples": 40},
    "cluster": {"k": 4, "holdout_fraction": 0.2},
    "kalman": {"horizons": [0.5, 1.0, 1.5]},
    "split": {"setting": "open_world", "test_fraction": 0.25, "val_fraction": 0.25},
    "predictor": {"d_h": 24, "d_mod": 12, "n_layers": 2, "m_modules": 4,
                   "gating_hidden": 12, "encoder_hidden": 24, "modes": 6,
                   "epochs": 2, "batch": 64, "lr": 0.001},
    "eval": {"bins": [0.5, 2.0]},
    "methods": ["baseline", "tmn", "aux", "both"]
  })";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("full pipeline on the fixture corpus") {
  const std::string dir = "/tmp/ctxbench_pipeline_a";
  fs::remove_all(dir);
  PipelineConfig config = parse_pipeline_config(fixture_config_json(dir, 5));

  for (const Stage stage : all_stages()) {
    CHECK(run_stage(stage, config) == StageStatus::kRan);
  }

  // All six per-(axis, type) autoencoders exist: the fixture corpus has
  // focal agents of every type above min_samples.
  for (const char* axis : {"ego", "social"}) {
    for (const char* type : {"vehicle", "pedestrian", "cyclist"}) {
      CHECK(fs::exists(fs::path(dir) / ("models/ae_" + std::string(axis) + "_" + type + ".txt")));
    }
  }

  // The ablation report carries all four method rows.
  const GapTable table = read_gap_csv((fs::path(dir) / "report.csv").string());
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].method == "baseline");
  CHECK(table.rows[1].method == "tmn");
  CHECK(table.rows[2].method == "aux");
  CHECK(table.rows[3].method == "both");
  for (const auto& row : table.rows) {
    CHECK(row.seen_fde.value > 0.0);
    CHECK(row.unseen_fde.value > 0.0);
    CHECK(row.seen_brier.value >= row.seen_fde.value);
  }

  SUBCASE("single-checkpoint evaluation against the split manifest") {
    const GapTable single = evaluate_checkpoint(
        config, (fs::path(dir) / "split.json").string(),
        (fs::path(dir) / "models/predictor_both.txt").string());
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0].method == "predictor_both");
    CHECK(single.rows[0].unseen_fde.value > 0.0);
  }

  SUBCASE("a checkpoint trained against another split is rejected") {
    PredictorModel model =
        load_predictor((fs::path(dir) / "models/predictor_both.txt").string());
    model.manifest_hash ^= 0x1;
    const std::string forged = (fs::path(dir) / "models/predictor_forged.txt").string();
    save_predictor(model, forged);
    CHECK_THROWS_AS(
        evaluate_checkpoint(config, (fs::path(dir) / "split.json").string(), forged),
        ValidationError);
  }

  // Cluster quality table reports a held-out silhouette per (axis, type).
  const CsvTable quality = read_csv((fs::path(dir) / "cluster_quality.csv").string());
  CHECK(quality.rows.size() == 6);

  // Per-bin detail: (method x population x bin) rows with counts and means.
  const CsvTable bins = read_csv((fs::path(dir) / "report_bins.csv").string());
  CHECK(bins.rows.size() == 4 * 2 * 3);
  int populated = 0;
  const int count_col = bins.column("count");
  for (const auto& row : bins.rows) populated += row[count_col] != "0" ? 1 : 0;
  CHECK(populated > 0);

  SUBCASE("rerunning reports every stage as up-to-date") {
    for (const Stage stage : all_stages()) {
      CHECK(run_stage(stage, config) == StageStatus::kUpToDate);
    }
  }

  SUBCASE("editing a threshold flags downstream stages as stale") {
    PipelineConfig edited = config;
    edited.features.interaction_radius = 42.0;
    CHECK_THROWS_AS(run_stage(Stage::kVectorize, edited), StalenessError);
    // The extract stage itself simply reruns under the new config.
    CHECK(run_stage(Stage::kExtract, edited) == StageStatus::kRan);
    CHECK(run_stage(Stage::kVectorize, edited) == StageStatus::kRan);
  }

  SUBCASE("tampering with an artifact is a staleness error naming the producer") {
    std::ofstream out(fs::path(dir) / "corpus.jsonl", std::ios::app);
    out << "\n";
    out.close();
    try {
      run_stage(Stage::kExtract, config);
      FAIL("expected staleness");
    } catch (const StalenessError& e) {
      CHECK(std::string(e.what()).find("synth") != std::string::npos);
    }
  }
}

TEST_CASE("two runs with the same root seed are byte-identical") {
  const std::string dir_a = "/tmp/ctxbench_pipeline_b1";
  const std::string dir_b = "/tmp/ctxbench_pipeline_b2";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  // A smaller corpus keeps this double run quick.
  auto small = [](const std::string& dir) {
    std::string json = fixture_config_json(dir, 21);
    return parse_pipeline_config(json);
  };
  PipelineConfig ca = small(dir_a);
  PipelineConfig cb = small(dir_b);
  for (const Stage stage : all_stages()) run_stage(stage, ca);
  for (const Stage stage : all_stages()) run_stage(stage, cb);

  for (const char* artifact :
       {"corpus.jsonl", "labels.csv", "difficulty.csv", "split.json", "report.csv",
        "models/predictor_baseline.txt", "models/predictor_both.txt", "predictions_both.csv"}) {
    CHECK(read_file(fs::path(dir_a) / artifact) == read_file(fs::path(dir_b) / artifact));
  }

  SUBCASE("compare_runs on identical runs shows zero deltas") {
    const std::string diff = compare_runs(dir_a, dir_b);
    CHECK(diff.find("delta 0") != std::string::npos);
    CHECK(diff.find("baseline") != std::string::npos);
  }

  SUBCASE("compare_runs rejects mismatched split settings") {
    // Forge the other run's report to carry a different setting label.
    GapTable table = read_gap_csv((fs::path(dir_b) / "report.csv").string());
    for (auto& row : table.rows) row.setting = "closed_world";
    write_gap_csv(table, (fs::path(dir_b) / "report.csv").string());
    CHECK_THROWS_AS(compare_runs(dir_a, dir_b), ValidationError);
  }
}

TEST_CASE("stage names round-trip") {
  for (const Stage stage : all_stages()) {
    CHECK(stage_from_name(stage_name(stage)) == stage);
  }
  CHECK_THROWS_AS(stage_from_name("bogus"), ValidationError);
}
