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

#ifndef CTXBENCH_PIPELINE_HPP_
#define CTXBENCH_PIPELINE_HPP_

#include <map>
#include <string>
#include <vector>

#include "ctxbench/autoencoder.hpp"
#include "ctxbench/difficulty.hpp"
#include "ctxbench/ego_features.hpp"
#include "ctxbench/evaluation.hpp"
#include "ctxbench/predictor.hpp"
#include "ctxbench/splits.hpp"
#include "ctxbench/synth.hpp"

namespace ctxbench {

struct ClusterConfig {
  int k = 11;
  double holdout_fraction = 0.2;  // silhouette validation share
};

struct SplitConfig {
  SplitSetting setting = SplitSetting::kOpenWorld;
  double test_fraction = 0.2;
  double val_fraction = 0.2;
};

struct EvalConfig {
  std::vector<double> bins = {20.0, 45.0};  // difficulty bin edges, meters
};

struct PipelineConfig {
  std::string out_dir = "run";
  uint64_t seed = 0;
  TimeConfig time;
  SynthConfig synth;
  FeatureConfig features;
  AutoencoderConfig autoencoder;
  ClusterConfig cluster;
  KalmanConfig kalman;
  SplitConfig split;
  PredictorConfig predictor;
  EvalConfig eval;
  std::vector<std::string> methods = {"baseline", "tmn", "aux", "both"};
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& json_text);
void write_resolved_config(const PipelineConfig& config, const std::string& path);

enum class Stage { kSynth, kExtract, kVectorize, kAutoencode, kCluster, kDifficulty, kSplit, kTrain, kEval };
const std::vector<Stage>& all_stages();
const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

enum class StageStatus { kRan, kUpToDate };

// Runs one stage against the artifacts in config.out_dir. Verifies that
// upstream artifacts hash-match the run manifest (staleness error names the
// stage to rerun), skips when this stage's record is current, and records
// config/input/output hashes on success.
StageStatus run_stage(Stage stage, const PipelineConfig& config);

// Side-by-side metric rows of two completed runs; requires matching split
// settings.
std::string compare_runs(const std::string& dir_a, const std::string& dir_b);

// Per-method ablation flags ("baseline", "tmn", "aux", "both").
PredictorConfig method_config(const PredictorConfig& base, const std::string& method);

// Experiment-level access to the artifacts of a run directory, for harnesses
// that train and evaluate outside the stage runner.

struct ExampleBundle {
  std::vector<TrainingExample> train, val, test;
};

// Retrains the context autoencoders on the manifest's train assignment only
// (their latents feed the gating network without touching held-out agents).
ModelRegistry retrain_split_autoencoders(const PipelineConfig& config, const std::string& run_dir,
                                         const SplitManifest& manifest);

// Assembles per-agent model inputs and targets from the run artifacts.
ExampleBundle build_examples(const PipelineConfig& config, const std::string& run_dir,
                             const SplitManifest& manifest, const ModelRegistry& gating_registry);

std::vector<AgentMetrics> evaluate_examples(const PredictorModel& model,
                                            const std::vector<TrainingExample>& examples,
                                            bool use_tmn);

// One-off evaluation of a single checkpoint against an explicit split
// manifest, outside the stage runner. The checkpoint's provenance hashes are
// still enforced. Returns the rendered table and writes no artifacts.
GapTable evaluate_checkpoint(const PipelineConfig& config, const std::string& manifest_path,
                             const std::string& checkpoint_path);

}  // namespace ctxbench

#endif  // CTXBENCH_PIPELINE_HPP_
