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

#ifndef CTXBENCH_AUTOENCODER_HPP_
#define CTXBENCH_AUTOENCODER_HPP_

#include <map>
#include <string>
#include <vector>

#include "ctxbench/clustering.hpp"
#include "ctxbench/neural.hpp"
#include "ctxbench/vectorize.hpp"

namespace ctxbench {

struct AutoencoderConfig {
  std::vector<int> hidden = {128, 64};  // encoder layout; decoder mirrors it
  int latent = 16;
  double dropout = 0.1;
  int dec_clusters = 11;
  double lambda_dec = 0.1;
  double warmup_frac = 0.3;  // fraction of epochs trained on pure MSE
  int p_refresh = 5;         // epochs between target-distribution refreshes
  int epochs = 60;
  int batch = 64;
  double lr = 1e-3;
  double momentum = 0.9;
  double lr_decay = 0.5;
  int lr_step = 20;
  int min_samples = 50;
};

struct Autoencoder {
  Axis axis = Axis::kEgo;
  AgentType agent_type = AgentType::kVehicle;
  DenseNet encoder;
  DenseNet decoder;
  Standardizer standardizer;
  uint64_t schema_hash = 0;
  uint64_t seed = 0;
  // Hash of the split manifest whose train set this model saw; 0 when the
  // model was fitted on the full corpus (context-derivation phase).
  uint64_t split_hash = 0;

  // Standardizes raw feature rows and encodes them (eval mode).
  Matrix encode(const std::vector<std::vector<double>>& rows) const;
  Matrix reconstruct(const Matrix& standardized) const;
};

struct DecState {
  Matrix centroids;  // dec_clusters x latent
};

struct AeTrainLog {
  std::vector<double> total_loss;  // per epoch
  std::vector<double> recon_loss;
  std::vector<double> dec_loss;
};

struct TrainedAutoencoder {
  Autoencoder model;
  DecState dec;
  AeTrainLog log;
};

// Mini-batch gradient descent with momentum on MSE + lambda * KL(P || Q).
// DEC centroids initialize from k-means on the latents after the warm-up
// phase and train jointly afterwards; P refreshes on a fixed epoch schedule.
// Deterministic for a fixed seed.
TrainedAutoencoder train_autoencoder(const std::vector<std::vector<double>>& vectors, Axis axis,
                                     AgentType agent_type, const GroupSchema& schema,
                                     const AutoencoderConfig& config, uint64_t seed,
                                     uint64_t split_hash = 0);

// Exactly one model per (axis, agent type).
class ModelRegistry {
 public:
  void add(Autoencoder model);
  const Autoencoder& get(Axis axis, AgentType type) const;
  bool has(Axis axis, AgentType type) const;
  size_t size() const { return models_.size(); }
  const std::map<std::pair<Axis, AgentType>, Autoencoder>& models() const { return models_; }

 private:
  std::map<std::pair<Axis, AgentType>, Autoencoder> models_;
};

void save_autoencoder(const Autoencoder& model, const std::string& path);
Autoencoder load_autoencoder(const std::string& path);

// Content fingerprint used by predictor checkpoints to pin the latent
// encoders they were trained with.
uint64_t autoencoder_fingerprint(const Autoencoder& model);

}  // namespace ctxbench

#endif  // CTXBENCH_AUTOENCODER_HPP_
