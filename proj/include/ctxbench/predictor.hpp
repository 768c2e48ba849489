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

#ifndef CTXBENCH_PREDICTOR_HPP_
#define CTXBENCH_PREDICTOR_HPP_

#include <optional>
#include <string>
#include <vector>

#include "ctxbench/clustering.hpp"
#include "ctxbench/difficulty.hpp"
#include "ctxbench/ego_features.hpp"
#include "ctxbench/neural.hpp"
#include "ctxbench/scenario.hpp"

namespace ctxbench {

struct PredictorConfig {
  int d_h = 128;          // bottleneck width
  int d_mod = 64;         // module width
  int n_layers = 3;       // module-bank depth
  int m_modules = 12;     // modules per layer
  int gating_hidden = 64;
  int encoder_hidden = 128;
  int k_neighbors = 8;
  int modes = 6;
  int latent = 16;        // per-axis gating latent width
  double lambda_cls = 0.5;
  double lambda_aux = 0.1;
  bool use_tmn = true;
  bool use_aux = true;
  int epochs = 30;
  int batch = 192;
  double lr = 1e-3;
  double momentum = 0.9;
  double lr_decay = 0.5;
  int lr_step = 10;
};

int scene_input_width(const TimeConfig& time, int k_neighbors);

// Deterministic, pose-invariant raw input for one focal agent: flattened
// relative history, pooled neighbor features, and lane/TCD summary scalars.
Vector build_scene_input(const Scenario& scenario, const std::string& focal_id,
                         const TimeConfig& time, const FeatureConfig& features, int k_neighbors);

struct PredictorModel {
  PredictorConfig config;
  TimeConfig time;
  int input_width = 0;
  DenseNet encoder;
  DenseNet gating;
  std::vector<std::vector<DenseNet>> bank;  // [layer][module]
  DenseNet projection;  // zero-initialized: the TMN path starts as identity
  DenseNet mode_head;
  DenseNet conf_head;
  DenseNet aux_head;
  uint64_t seed = 0;
  uint64_t manifest_hash = 0;
  uint64_t ego_encoder_fingerprint = 0;
  uint64_t social_encoder_fingerprint = 0;

  static PredictorModel create(const PredictorConfig& config, const TimeConfig& time,
                               int input_width, uint64_t seed);
};

struct PredictorOutput {
  std::vector<Matrix> trajectories;  // per mode: batch x (t_fut*2), final-pose frame
  Matrix confidences;                // batch x modes, rows sum to 1
  Matrix aux;                        // batch x 3 anticipated Kalman errors
};

// Batched inference (eval mode, deterministic).
PredictorOutput predictor_forward(const PredictorModel& model, const Matrix& inputs,
                                  const Matrix& gating_inputs, bool use_tmn);

struct TrainingExample {
  AgentKey key;
  Vector input;
  Vector gating_input;               // z_e' ++ z_s'
  Matrix gt_future;                  // t_fut x 2, final-pose frame
  std::vector<uint8_t> future_valid; // per future step
  Vector aux_target;                 // per-horizon Kalman errors
  std::vector<uint8_t> aux_valid;
  double difficulty = 0.0;
};

struct PredictorLoss {
  double total = 0.0;
  double wta = 0.0;
  double cls = 0.0;
  double aux = 0.0;
  std::vector<int> best_mode;  // -1 for skipped samples
};

// One forward/backward pass over a batch. Winner-takes-all regression over
// valid future steps, cross-entropy toward the best mode, and the auxiliary
// difficulty regression; samples without a valid future step are skipped.
// When `flat_grads` is given it receives exact gradients for every parameter
// through the full graph (in predictor_parameters order).
PredictorLoss predictor_train_step(const PredictorModel& model,
                                   const std::vector<const TrainingExample*>& batch, bool use_tmn,
                                   bool use_aux, std::vector<double>* flat_grads,
                                   PredictorOutput* output_out = nullptr);

// Flat parameter plumbing (fixed order, shared with checkpoints).
std::vector<double> predictor_parameters(const PredictorModel& model);
void set_predictor_parameters(PredictorModel* model, const std::vector<double>& flat);

struct EpochLog {
  double train_loss = 0.0;
  double val_brier_fde = 0.0;
};

struct TrainedPredictor {
  PredictorModel model;
  std::vector<EpochLog> log;
  int best_epoch = -1;
};

// Mini-batch SGD with momentum and fixed step decay; logs validation
// Brier-FDE per epoch and returns the parameters of the best epoch.
TrainedPredictor train_predictor(const std::vector<TrainingExample>& train,
                                 const std::vector<TrainingExample>& val,
                                 const PredictorConfig& config, const TimeConfig& time,
                                 uint64_t seed);

void save_predictor(const PredictorModel& model, const std::string& path);
PredictorModel load_predictor(const std::string& path);

}  // namespace ctxbench

#endif  // CTXBENCH_PREDICTOR_HPP_
