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

#ifndef CTXBENCH_NEURAL_HPP_
#define CTXBENCH_NEURAL_HPP_

#include <vector>

#include <Eigen/Dense>

#include "ctxbench/rng.hpp"

namespace ctxbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kLinear, kRelu };

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation activation = Activation::kRelu;
  bool layer_norm = false;
  double dropout = 0.0;
};

struct DenseLayer {
  LayerSpec spec;
  Matrix w;      // in x out
  Vector b;      // out
  Vector gamma;  // layer-norm scale, empty unless spec.layer_norm
  Vector beta;   // layer-norm shift
};

struct LayerCache {
  Matrix input;
  Matrix pre_norm;      // affine output
  Matrix normalized;    // pre-affine layer-norm output
  Vector inv_std;       // per sample
  Matrix pre_act;       // activation input
  Matrix dropout_mask;  // inverted-dropout mask, empty when unused
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

struct LayerGrads {
  Matrix w;
  Vector b;
  Vector gamma;
  Vector beta;
};

struct NetGrads {
  std::vector<LayerGrads> layers;
};

// Plain MLP: per layer affine -> layer norm (hidden) -> activation ->
// dropout (training only, seeded mask). Parameters are 64-bit throughout.
class DenseNet {
 public:
  DenseNet() = default;

  static DenseNet create(const std::vector<LayerSpec>& specs, Rng& rng);

  // `dropout_rng` is required in training mode when any layer has dropout.
  Matrix forward(const Matrix& input, bool training, Rng* dropout_rng,
                 ForwardCache* cache = nullptr) const;

  // Exact reverse-mode gradients. Returns the gradient w.r.t. the input.
  Matrix backward(const ForwardCache& cache, const Matrix& d_output, NetGrads* grads) const;

  int parameter_count() const;
  void zero_parameters();

  std::vector<DenseLayer> layers;
};

// Flat parameter plumbing shared by optimizers, checkpoints, and
// finite-difference checks.
void append_parameters(const DenseNet& net, std::vector<double>* out);
size_t read_parameters(DenseNet* net, const std::vector<double>& flat, size_t offset);
void append_gradients(const NetGrads& grads, std::vector<double>* out);
NetGrads zero_grads_like(const DenseNet& net);
void accumulate(NetGrads* into, const NetGrads& from);

struct LossResult {
  double value = 0.0;
  Matrix grad;  // w.r.t. the prediction
};

// Mean squared error over all elements.
LossResult mse_loss(const Matrix& pred, const Matrix& target);

// Student-t (alpha = 1) soft assignment of latents to centroids; rows sum to 1.
Matrix dec_soft_assignment(const Matrix& latents, const Matrix& centroids);

// Self-sharpening target distribution p_ij = (q_ij^2 / f_j) / sum_j'.
Matrix dec_target(const Matrix& q);

// KL(P || Q) averaged over rows, with Q derived from (latents, centroids).
double dec_kl(const Matrix& p, const Matrix& q);

// Analytic gradient of dec_kl w.r.t. latents and centroids, holding P fixed.
void dec_kl_backward(const Matrix& latents, const Matrix& centroids, const Matrix& p,
                     Matrix* d_latents, Matrix* d_centroids);

// SGD with classical momentum over a flat parameter vector.
class SgdMomentum {
 public:
  SgdMomentum(size_t size, double momentum) : velocity_(size, 0.0), momentum_(momentum) {}

  void step(std::vector<double>* params, const std::vector<double>& grads, double lr);

 private:
  std::vector<double> velocity_;
  double momentum_;
};

}  // namespace ctxbench

#endif  // CTXBENCH_NEURAL_HPP_
