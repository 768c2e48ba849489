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

#include "ctxbench/neural.hpp"

#include <cmath>

#include "ctxbench/errors.hpp"

namespace ctxbench {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

DenseNet DenseNet::create(const std::vector<LayerSpec>& specs, Rng& rng) {
  DenseNet net;
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& spec = specs[i];
    if (i > 0 && specs[i - 1].out != spec.in) {
      throw ContractError("DenseNet: layer shapes do not chain");
    }
    DenseLayer layer;
    layer.spec = spec;
    layer.w.resize(spec.in, spec.out);
    const double scale = std::sqrt(2.0 / static_cast<double>(spec.in));
    for (int r = 0; r < spec.in; ++r) {
      for (int c = 0; c < spec.out; ++c) layer.w(r, c) = rng.normal(0.0, scale);
    }
    layer.b = Vector::Zero(spec.out);
    if (spec.layer_norm) {
      layer.gamma = Vector::Ones(spec.out);
      layer.beta = Vector::Zero(spec.out);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix DenseNet::forward(const Matrix& input, bool training, Rng* dropout_rng,
                         ForwardCache* cache) const {
  if (layers.empty()) throw ContractError("DenseNet: empty network");
  if (input.cols() != layers.front().spec.in) {
    throw ContractError("DenseNet: input width " + std::to_string(input.cols()) + " != " +
                        std::to_string(layers.front().spec.in));
  }
  if (cache) cache->layers.assign(layers.size(), LayerCache{});

  Matrix x = input;
  for (size_t li = 0; li < layers.size(); ++li) {
    const DenseLayer& layer = layers[li];
    LayerCache local;
    local.input = x;

    Matrix z = (x * layer.w).rowwise() + layer.b.transpose();
    local.pre_norm = z;

    if (layer.spec.layer_norm) {
      local.inv_std.resize(z.rows());
      Matrix xhat(z.rows(), z.cols());
      for (int r = 0; r < z.rows(); ++r) {
        const double mu = z.row(r).mean();
        const double var = (z.row(r).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        local.inv_std(r) = inv;
        xhat.row(r) = (z.row(r).array() - mu) * inv;
      }
      local.normalized = xhat;
      z = (xhat.array().rowwise() * layer.gamma.transpose().array()).matrix();
      z.rowwise() += layer.beta.transpose();
    }
    local.pre_act = z;

    if (layer.spec.activation == Activation::kRelu) {
      z = z.cwiseMax(0.0);
    }

    if (layer.spec.dropout > 0.0 && training) {
      if (dropout_rng == nullptr) {
        throw ContractError("DenseNet: dropout in training mode needs an rng");
      }
      const double keep = 1.0 - layer.spec.dropout;
      Matrix mask(z.rows(), z.cols());
      for (int r = 0; r < z.rows(); ++r) {
        for (int c = 0; c < z.cols(); ++c) {
          mask(r, c) = dropout_rng->uniform() >= layer.spec.dropout ? 1.0 / keep : 0.0;
        }
      }
      z = z.cwiseProduct(mask);
      local.dropout_mask = std::move(mask);
    }

    if (cache) (*cache).layers[li] = std::move(local);
    x = std::move(z);
  }
  return x;
}

Matrix DenseNet::backward(const ForwardCache& cache, const Matrix& d_output,
                          NetGrads* grads) const {
  if (cache.layers.size() != layers.size()) {
    throw ContractError("DenseNet: cache does not match network");
  }
  grads->layers.assign(layers.size(), LayerGrads{});

  Matrix d = d_output;
  for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
    const DenseLayer& layer = layers[li];
    const LayerCache& local = cache.layers[li];
    LayerGrads& g = grads->layers[li];

    if (local.dropout_mask.size() > 0) {
      d = d.cwiseProduct(local.dropout_mask);
    }
    if (layer.spec.activation == Activation::kRelu) {
      d = d.cwiseProduct((local.pre_act.array() > 0.0).cast<double>().matrix());
    }
    if (layer.spec.layer_norm) {
      g.gamma = d.cwiseProduct(local.normalized).colwise().sum().transpose();
      g.beta = d.colwise().sum().transpose();
      Matrix dxhat = (d.array().rowwise() * layer.gamma.transpose().array()).matrix();
      Matrix dz(d.rows(), d.cols());
      for (int r = 0; r < d.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(local.normalized.row(r)).mean();
        dz.row(r) =
            (dxhat.row(r).array() - m1 - local.normalized.row(r).array() * m2) * local.inv_std(r);
      }
      d = std::move(dz);
    }
    g.w = local.input.transpose() * d;
    g.b = d.colwise().sum().transpose();
    d = d * layer.w.transpose();
  }
  return d;
}

int DenseNet::parameter_count() const {
  int n = 0;
  for (const auto& layer : layers) {
    n += static_cast<int>(layer.w.size() + layer.b.size() + layer.gamma.size() + layer.beta.size());
  }
  return n;
}

void DenseNet::zero_parameters() {
  for (auto& layer : layers) {
    layer.w.setZero();
    layer.b.setZero();
    if (layer.gamma.size()) layer.gamma.setOnes();
    if (layer.beta.size()) layer.beta.setZero();
  }
}

void append_parameters(const DenseNet& net, std::vector<double>* out) {
  for (const auto& layer : net.layers) {
    out->insert(out->end(), layer.w.data(), layer.w.data() + layer.w.size());
    out->insert(out->end(), layer.b.data(), layer.b.data() + layer.b.size());
    out->insert(out->end(), layer.gamma.data(), layer.gamma.data() + layer.gamma.size());
    out->insert(out->end(), layer.beta.data(), layer.beta.data() + layer.beta.size());
  }
}

size_t read_parameters(DenseNet* net, const std::vector<double>& flat, size_t offset) {
  for (auto& layer : net->layers) {
    auto take = [&](double* dst, size_t n) {
      if (offset + n > flat.size()) throw ContractError("read_parameters: flat vector too short");
      std::copy(flat.begin() + offset, flat.begin() + offset + n, dst);
      offset += n;
    };
    take(layer.w.data(), layer.w.size());
    take(layer.b.data(), layer.b.size());
    take(layer.gamma.data(), layer.gamma.size());
    take(layer.beta.data(), layer.beta.size());
  }
  return offset;
}

void append_gradients(const NetGrads& grads, std::vector<double>* out) {
  for (const auto& g : grads.layers) {
    out->insert(out->end(), g.w.data(), g.w.data() + g.w.size());
    out->insert(out->end(), g.b.data(), g.b.data() + g.b.size());
    out->insert(out->end(), g.gamma.data(), g.gamma.data() + g.gamma.size());
    out->insert(out->end(), g.beta.data(), g.beta.data() + g.beta.size());
  }
}

NetGrads zero_grads_like(const DenseNet& net) {
  NetGrads grads;
  for (const auto& layer : net.layers) {
    LayerGrads g;
    g.w = Matrix::Zero(layer.w.rows(), layer.w.cols());
    g.b = Vector::Zero(layer.b.size());
    g.gamma = Vector::Zero(layer.gamma.size());
    g.beta = Vector::Zero(layer.beta.size());
    grads.layers.push_back(std::move(g));
  }
  return grads;
}

void accumulate(NetGrads* into, const NetGrads& from) {
  if (into->layers.size() != from.layers.size()) throw ContractError("accumulate: shape mismatch");
  for (size_t i = 0; i < from.layers.size(); ++i) {
    into->layers[i].w += from.layers[i].w;
    into->layers[i].b += from.layers[i].b;
    if (from.layers[i].gamma.size()) into->layers[i].gamma += from.layers[i].gamma;
    if (from.layers[i].beta.size()) into->layers[i].beta += from.layers[i].beta;
  }
}

LossResult mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ContractError("mse_loss: shape mismatch");
  }
  LossResult out;
  const Matrix diff = pred - target;
  const double n = static_cast<double>(pred.size());
  out.value = diff.squaredNorm() / n;
  out.grad = diff * (2.0 / n);
  return out;
}

Matrix dec_soft_assignment(const Matrix& latents, const Matrix& centroids) {
  if (latents.rows() < 1) throw ContractError("dec_soft_assignment: no latents");
  if (latents.cols() != centroids.cols()) {
    throw ContractError("dec_soft_assignment: dimension mismatch");
  }
  const int n = static_cast<int>(latents.rows());
  const int k = static_cast<int>(centroids.rows());
  Matrix q(n, k);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const double d2 = (latents.row(i) - centroids.row(j)).squaredNorm();
      q(i, j) = 1.0 / (1.0 + d2);
      sum += q(i, j);
    }
    q.row(i) /= sum;
  }
  return q;
}

Matrix dec_target(const Matrix& q) {
  const Vector f = q.colwise().sum().transpose();
  Matrix p(q.rows(), q.cols());
  for (int i = 0; i < q.rows(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < q.cols(); ++j) {
      p(i, j) = q(i, j) * q(i, j) / f(j);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

double dec_kl(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw ContractError("dec_kl: shape mismatch");
  double total = 0.0;
  for (int i = 0; i < p.rows(); ++i) {
    for (int j = 0; j < p.cols(); ++j) {
      if (p(i, j) > 0.0) total += p(i, j) * std::log(p(i, j) / q(i, j));
    }
  }
  return total / static_cast<double>(p.rows());
}

void dec_kl_backward(const Matrix& latents, const Matrix& centroids, const Matrix& p,
                     Matrix* d_latents, Matrix* d_centroids) {
  const int n = static_cast<int>(latents.rows());
  const int k = static_cast<int>(centroids.rows());
  *d_latents = Matrix::Zero(latents.rows(), latents.cols());
  *d_centroids = Matrix::Zero(centroids.rows(), centroids.cols());
  for (int i = 0; i < n; ++i) {
    double s_sum = 0.0;
    Vector s(k);
    for (int j = 0; j < k; ++j) {
      const double d2 = (latents.row(i) - centroids.row(j)).squaredNorm();
      s(j) = 1.0 / (1.0 + d2);
      s_sum += s(j);
    }
    for (int j = 0; j < k; ++j) {
      const double qij = s(j) / s_sum;
      // d(mean-KL)/ds_ij with P fixed; rows of P sum to 1.
      const double g = (1.0 - p(i, j) / qij) / (s_sum * static_cast<double>(n));
      const double coeff = g * (-s(j) * s(j)) * 2.0;
      const auto diff = latents.row(i) - centroids.row(j);
      d_latents->row(i) += coeff * diff;
      d_centroids->row(j) -= coeff * diff;
    }
  }
}

void SgdMomentum::step(std::vector<double>* params, const std::vector<double>& grads, double lr) {
  if (params->size() != velocity_.size() || grads.size() != velocity_.size()) {
    throw ContractError("SgdMomentum: size mismatch");
  }
  for (size_t i = 0; i < velocity_.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] - lr * grads[i];
    (*params)[i] += velocity_[i];
  }
}

}  // namespace ctxbench
