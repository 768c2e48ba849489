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

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ctxbench/errors.hpp"
#include "ctxbench/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitStale = 2;

struct CommonOptions {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
};

ctxbench::PipelineConfig resolve_config(const CommonOptions& opts) {
  ctxbench::PipelineConfig config;
  if (!opts.config_path.empty()) {
    config = ctxbench::load_pipeline_config(opts.config_path);
  }
  if (opts.seed_set) config.seed = opts.seed;
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  return config;
}

void add_common(CLI::App* cmd, CommonOptions* opts) {
  cmd->add_option("--config", opts->config_path, "pipeline config JSON");
  cmd->add_option("--seed", opts->seed, "root seed")->each([opts](const std::string&) {
    opts->seed_set = true;
  });
  cmd->add_option("--out", opts->out_dir, "run directory");
}

int run_stages(const ctxbench::PipelineConfig& config, const std::vector<ctxbench::Stage>& stages) {
  for (const ctxbench::Stage stage : stages) {
    const ctxbench::StageStatus status = ctxbench::run_stage(stage, config);
    std::cout << ctxbench::stage_name(stage) << ": "
              << (status == ctxbench::StageStatus::kRan ? "ran" : "up-to-date") << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxbench: compositional context benchmark for trajectory prediction"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string stage_name;
  std::string split_setting;
  double test_frac = -1.0, val_frac = -1.0;
  std::string manifest_path, checkpoint_path, bins_text;
  std::string compare_a, compare_b;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth, &opts);

  CLI::App* stage_cmd = app.add_subcommand("stage", "run one pipeline stage");
  add_common(stage_cmd, &opts);
  stage_cmd->add_option("name", stage_name, "stage to run")->required();

  CLI::App* split_cmd = app.add_subcommand("split", "construct the train/val/test split");
  add_common(split_cmd, &opts);
  split_cmd->add_option("--setting", split_setting, "closed or open");
  split_cmd->add_option("--test-frac", test_frac, "test fraction");
  split_cmd->add_option("--val-frac", val_frac, "validation fraction");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate trained checkpoints");
  add_common(eval_cmd, &opts);
  eval_cmd->add_option("--bins", bins_text, "difficulty bin edges, comma separated");
  eval_cmd->add_option("--manifest", manifest_path, "split manifest for a one-off evaluation");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "predictor checkpoint to evaluate");

  CLI::App* pipeline_cmd = app.add_subcommand("pipeline", "run all stages in order");
  add_common(pipeline_cmd, &opts);

  CLI::App* compare_cmd = app.add_subcommand("compare", "diff two completed runs");
  compare_cmd->add_option("run_a", compare_a, "first run directory")->required();
  compare_cmd->add_option("run_b", compare_b, "second run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return run_stages(resolve_config(opts), {ctxbench::Stage::kSynth});
    }
    if (stage_cmd->parsed()) {
      return run_stages(resolve_config(opts), {ctxbench::stage_from_name(stage_name)});
    }
    if (split_cmd->parsed()) {
      ctxbench::PipelineConfig config = resolve_config(opts);
      if (!split_setting.empty()) {
        if (split_setting == "closed" || split_setting == "closed_world") {
          config.split.setting = ctxbench::SplitSetting::kClosedWorld;
        } else if (split_setting == "open" || split_setting == "open_world") {
          config.split.setting = ctxbench::SplitSetting::kOpenWorld;
        } else {
          throw ctxbench::ValidationError("unknown split setting '" + split_setting + "'");
        }
      }
      if (test_frac > 0.0) config.split.test_fraction = test_frac;
      if (val_frac > 0.0) config.split.val_fraction = val_frac;
      return run_stages(config, {ctxbench::Stage::kSplit});
    }
    if (eval_cmd->parsed()) {
      ctxbench::PipelineConfig config = resolve_config(opts);
      if (!bins_text.empty()) {
        config.eval.bins.clear();
        std::stringstream ss(bins_text);
        std::string edge;
        while (std::getline(ss, edge, ',')) config.eval.bins.push_back(std::stod(edge));
      }
      if (!manifest_path.empty() || !checkpoint_path.empty()) {
        if (manifest_path.empty() || checkpoint_path.empty()) {
          throw ctxbench::ValidationError("eval: --manifest and --checkpoint go together");
        }
        const ctxbench::GapTable table =
            ctxbench::evaluate_checkpoint(config, manifest_path, checkpoint_path);
        std::cout << ctxbench::render_gap_table(table);
        return kExitOk;
      }
      return run_stages(config, {ctxbench::Stage::kEval});
    }
    if (pipeline_cmd->parsed()) {
      return run_stages(resolve_config(opts), ctxbench::all_stages());
    }
    if (compare_cmd->parsed()) {
      std::cout << ctxbench::compare_runs(compare_a, compare_b);
      return kExitOk;
    }
  } catch (const ctxbench::StalenessError& e) {
    std::cerr << "stale: " << e.what() << "\n";
    return kExitStale;
  } catch (const ctxbench::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
