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

#include "ctxbench/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ctxbench/errors.hpp"
#include "ctxbench/evaluation.hpp"
#include "ctxbench/social_features.hpp"

namespace ctxbench {

int scene_input_width(const TimeConfig& time, int k_neighbors) {
  (void)k_neighbors;  // pooled, so the width does not depend on it
  return time.t_hist * 7 + 17 + 12;
}

Vector build_scene_input(const Scenario& scenario, const std::string& focal_id,
                         const TimeConfig& time, const FeatureConfig& features, int k_neighbors) {
  const AgentTrack* focal_raw = scenario.find_agent(focal_id);
  if (focal_raw == nullptr) throw ContractError("build_scene_input: unknown focal id " + focal_id);
  const AgentTrack focal = interpolate_history(*focal_raw, *focal_raw, time);
  const Pose pose = final_pose(focal, time);
  const int final_idx = time.t_hist - 1;

  Vector x = Vector::Zero(scene_input_width(time, k_neighbors));
  int at = 0;
  for (int t = 0; t < time.t_hist; ++t) {
    const AgentState& st = focal.states[t];
    if (st.valid) {
      const Vec2 p = to_frame(st.position, pose);
      const Vec2 v = rotate_into(st.velocity, pose);
      const Vec2 a = rotate_into(st.acceleration, pose);
      x(at + 0) = p.x;
      x(at + 1) = p.y;
      x(at + 2) = v.x;
      x(at + 3) = v.y;
      x(at + 4) = a.x;
      x(at + 5) = a.y;
      x(at + 6) = 1.0;
    }
    at += 7;
  }

  // Nearest neighbors (any agent valid at the final step within the radius),
  // mean- and max-pooled so the encoding is permutation invariant.
  struct Neighbor {
    double dist;
    size_t index;
    Eigen::Matrix<double, 8, 1> feat;
  };
  std::vector<Neighbor> neighbors;
  for (size_t i = 0; i < scenario.agents.size(); ++i) {
    const AgentTrack& other = scenario.agents[i];
    if (other.agent_id == focal_id) continue;
    const AgentTrack interp = interpolate_history(other, *focal_raw, time);
    if (!interp.states[final_idx].valid) continue;
    const AgentState& st = interp.states[final_idx];
    const double dist = (st.position - pose.position).norm();
    if (dist > features.interaction_radius) continue;
    Neighbor n;
    n.dist = dist;
    n.index = i;
    const Vec2 p = to_frame(st.position, pose);
    const Vec2 v = rotate_into(st.velocity, pose);
    n.feat << p.x, p.y, v.x, v.y, other.agent_type == AgentType::kVehicle ? 1.0 : 0.0,
        other.agent_type == AgentType::kPedestrian ? 1.0 : 0.0,
        other.agent_type == AgentType::kCyclist ? 1.0 : 0.0, dist;
    neighbors.push_back(std::move(n));
  }
  std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.index < b.index;
  });
  if (static_cast<int>(neighbors.size()) > k_neighbors) neighbors.resize(k_neighbors);
  if (!neighbors.empty()) {
    Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
    Eigen::Matrix<double, 8, 1> maxv =
        Eigen::Matrix<double, 8, 1>::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& n : neighbors) {
      mean += n.feat;
      maxv = maxv.cwiseMax(n.feat);
    }
    mean /= static_cast<double>(neighbors.size());
    x.segment(at, 8) = mean;
    x.segment(at + 8, 8) = maxv;
    x(at + 16) = static_cast<double>(neighbors.size());
  }
  at += 17;

  const auto lane = assign_lane(focal, scenario.map, time, features);
  if (lane) {
    x(at + 0) = 1.0;
    x(at + 1) = lane->heading_diff;
    x(at + 2) = lane->lateral_offset;
    x(at + 3) = lane->compliance.empty() ? 0.0 : lane->compliance.back();
  }
  at += 4;
  const TcdProximityResult tcd = tcd_proximity(pose, scenario.map);
  for (int k = 0; k < kNumTcdKinds; ++k) {
    if (tcd.closest[k]) {
      x(at + 2 * k) = std::min(tcd.closest[k]->distance, features.interaction_radius);
      x(at + 2 * k + 1) = 1.0;
    }
  }
  return x;
}

PredictorModel PredictorModel::create(const PredictorConfig& config, const TimeConfig& time,
                                      int input_width, uint64_t seed) {
  PredictorModel model;
  model.config = config;
  model.time = time;
  model.input_width = input_width;
  model.seed = seed;
  Rng rng(Rng::substream(seed, "predictor_init"));

  model.encoder = DenseNet::create(
      {{input_width, config.encoder_hidden, Activation::kRelu, true, 0.0},
       {config.encoder_hidden, config.d_h, Activation::kLinear, false, 0.0}},
      rng);
  const int gate_out = (config.n_layers - 1) * config.m_modules * config.m_modules;
  model.gating = DenseNet::create(
      {{2 * config.latent, config.gating_hidden, Activation::kRelu, false, 0.0},
       {config.gating_hidden, gate_out, Activation::kLinear, false, 0.0}},
      rng);
  model.bank.resize(config.n_layers);
  for (int l = 0; l < config.n_layers; ++l) {
    const int in = l == 0 ? config.d_h : config.d_mod;
    for (int m = 0; m < config.m_modules; ++m) {
      model.bank[l].push_back(
          DenseNet::create({{in, config.d_mod, Activation::kRelu, false, 0.0}}, rng));
    }
  }
  model.projection = DenseNet::create(
      {{config.m_modules * config.d_mod, config.d_h, Activation::kLinear, false, 0.0}}, rng);
  model.projection.zero_parameters();  // identity-at-init for the TMN path
  const int t_fut = time.t_fut;
  model.mode_head = DenseNet::create(
      {{config.d_h, config.modes * t_fut * 2, Activation::kLinear, false, 0.0}}, rng);
  model.conf_head =
      DenseNet::create({{config.d_h, config.modes, Activation::kLinear, false, 0.0}}, rng);
  model.aux_head = DenseNet::create({{config.d_h, 3, Activation::kLinear, false, 0.0}}, rng);
  return model;
}

namespace {

struct PredictorCache {
  ForwardCache encoder;
  Matrix h;
  bool tmn = false;
  ForwardCache gating;
  Matrix logits;
  std::vector<std::vector<Matrix>> out;                 // [layer][module] B x d_mod
  std::vector<std::vector<ForwardCache>> module_cache;  // [layer][module]
  std::vector<std::vector<Matrix>> weights;             // [layer-1][module] B x M
  Matrix concat;
  ForwardCache proj_cache;
  Matrix h_prime;
  ForwardCache mode_cache, conf_cache, aux_cache;
  Matrix disp;  // raw per-step displacements
  Matrix conf_softmax;
};

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (int r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

PredictorOutput run_forward(const PredictorModel& model, const Matrix& inputs,
                            const Matrix& gating_inputs, bool use_tmn, PredictorCache* cache) {
  const PredictorConfig& cfg = model.config;
  const int b = static_cast<int>(inputs.rows());
  const int m_mod = cfg.m_modules;

  PredictorCache local;
  PredictorCache& c = cache ? *cache : local;
  c.tmn = use_tmn;

  c.h = model.encoder.forward(inputs, false, nullptr, &c.encoder);

  if (use_tmn) {
    if (gating_inputs.rows() != b || gating_inputs.cols() != 2 * cfg.latent) {
      throw ContractError("predictor: gating latents missing or mis-sized for the TMN path");
    }
    c.logits = model.gating.forward(gating_inputs, false, nullptr, &c.gating);
    c.out.assign(cfg.n_layers, {});
    c.module_cache.assign(cfg.n_layers, {});
    c.weights.assign(cfg.n_layers - 1, {});
    for (int m = 0; m < m_mod; ++m) {
      ForwardCache mc;
      c.out[0].push_back(model.bank[0][m].forward(c.h, false, nullptr, &mc));
      c.module_cache[0].push_back(std::move(mc));
    }
    for (int l = 1; l < cfg.n_layers; ++l) {
      for (int m = 0; m < m_mod; ++m) {
        const int group = ((l - 1) * m_mod + m) * m_mod;
        const Matrix w = softmax_rows(c.logits.middleCols(group, m_mod));
        Matrix mixed = Matrix::Zero(b, cfg.d_mod);
        for (int j = 0; j < m_mod; ++j) {
          mixed += (c.out[l - 1][j].array().colwise() * w.col(j).array()).matrix();
        }
        c.weights[l - 1].push_back(w);
        ForwardCache mc;
        c.out[l].push_back(model.bank[l][m].forward(mixed, false, nullptr, &mc));
        c.module_cache[l].push_back(std::move(mc));
      }
    }
    c.concat.resize(b, m_mod * cfg.d_mod);
    for (int m = 0; m < m_mod; ++m) {
      c.concat.middleCols(m * cfg.d_mod, cfg.d_mod) = c.out[cfg.n_layers - 1][m];
    }
    const Matrix proj = model.projection.forward(c.concat, false, nullptr, &c.proj_cache);
    c.h_prime = c.h + proj;
  } else {
    c.h_prime = c.h;
  }

  c.disp = model.mode_head.forward(c.h_prime, false, nullptr, &c.mode_cache);
  const Matrix conf_logits = model.conf_head.forward(c.h_prime, false, nullptr, &c.conf_cache);
  c.conf_softmax = softmax_rows(conf_logits);
  const Matrix aux = model.aux_head.forward(c.h_prime, false, nullptr, &c.aux_cache);

  PredictorOutput out;
  const int t_fut = model.time.t_fut;
  out.trajectories.reserve(cfg.modes);
  for (int k = 0; k < cfg.modes; ++k) {
    Matrix traj = c.disp.middleCols(k * t_fut * 2, t_fut * 2);
    for (int t = 1; t < t_fut; ++t) {
      traj.col(t * 2) += traj.col((t - 1) * 2);
      traj.col(t * 2 + 1) += traj.col((t - 1) * 2 + 1);
    }
    out.trajectories.push_back(std::move(traj));
  }
  out.confidences = c.conf_softmax;
  out.aux = aux;
  return out;
}

// Canonical parameter/gradient ordering.
template <typename NetFn>
void for_each_net(const PredictorModel& model, NetFn&& fn) {
  fn(model.encoder);
  fn(model.gating);
  for (const auto& layer : model.bank) {
    for (const auto& module : layer) fn(module);
  }
  fn(model.projection);
  fn(model.mode_head);
  fn(model.conf_head);
  fn(model.aux_head);
}

template <typename NetFn>
void for_each_net_mutable(PredictorModel* model, NetFn&& fn) {
  fn(&model->encoder);
  fn(&model->gating);
  for (auto& layer : model->bank) {
    for (auto& module : layer) fn(&module);
  }
  fn(&model->projection);
  fn(&model->mode_head);
  fn(&model->conf_head);
  fn(&model->aux_head);
}

}  // namespace

PredictorOutput predictor_forward(const PredictorModel& model, const Matrix& inputs,
                                  const Matrix& gating_inputs, bool use_tmn) {
  return run_forward(model, inputs, gating_inputs, use_tmn, nullptr);
}

std::vector<double> predictor_parameters(const PredictorModel& model) {
  std::vector<double> flat;
  for_each_net(model, [&flat](const DenseNet& net) { append_parameters(net, &flat); });
  return flat;
}

void set_predictor_parameters(PredictorModel* model, const std::vector<double>& flat) {
  size_t offset = 0;
  for_each_net_mutable(model, [&flat, &offset](DenseNet* net) {
    offset = read_parameters(net, flat, offset);
  });
  if (offset != flat.size()) throw ContractError("set_predictor_parameters: size mismatch");
}

PredictorLoss predictor_train_step(const PredictorModel& model,
                                   const std::vector<const TrainingExample*>& batch, bool use_tmn,
                                   bool use_aux, std::vector<double>* flat_grads,
                                   PredictorOutput* output_out) {
  const PredictorConfig& cfg = model.config;
  const int b = static_cast<int>(batch.size());
  const int t_fut = model.time.t_fut;
  if (b == 0) throw ContractError("predictor_train_step: empty batch");

  Matrix inputs(b, model.input_width);
  Matrix gating_inputs(b, 2 * cfg.latent);
  for (int i = 0; i < b; ++i) {
    inputs.row(i) = batch[i]->input.transpose();
    if (use_tmn) {
      if (batch[i]->gating_input.size() != 2 * cfg.latent) {
        throw ContractError("predictor_train_step: example lacks gating latents");
      }
      gating_inputs.row(i) = batch[i]->gating_input.transpose();
    }
  }
  if (!use_tmn) gating_inputs.setZero();

  PredictorCache cache;
  PredictorOutput output = run_forward(model, inputs, gating_inputs, use_tmn, &cache);

  PredictorLoss loss;
  loss.best_mode.assign(b, -1);

  // Winner-takes-all: per sample, mean L2 distance of each mode over valid
  // steps; the best mode receives the regression gradient.
  std::vector<int> n_valid(b, 0);
  int b_eff = 0;
  std::vector<double> best_err(b, 0.0);
  for (int i = 0; i < b; ++i) {
    for (int t = 0; t < t_fut; ++t) {
      if (batch[i]->future_valid[t]) ++n_valid[i];
    }
    if (n_valid[i] == 0) continue;
    ++b_eff;
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k < cfg.modes; ++k) {
      double err = 0.0;
      for (int t = 0; t < t_fut; ++t) {
        if (!batch[i]->future_valid[t]) continue;
        const double dx = output.trajectories[k](i, t * 2) - batch[i]->gt_future(t, 0);
        const double dy = output.trajectories[k](i, t * 2 + 1) - batch[i]->gt_future(t, 1);
        err += std::sqrt(dx * dx + dy * dy);
      }
      err /= n_valid[i];
      if (err < best) {
        best = err;
        best_k = k;
      }
    }
    loss.best_mode[i] = best_k;
    best_err[i] = best;
  }
  if (b_eff == 0) {
    if (flat_grads) flat_grads->assign(predictor_parameters(model).size(), 0.0);
    if (output_out) *output_out = std::move(output);
    return loss;
  }

  double wta = 0.0, cls = 0.0;
  for (int i = 0; i < b; ++i) {
    if (loss.best_mode[i] < 0) continue;
    wta += best_err[i];
    cls += -std::log(std::max(cache.conf_softmax(i, loss.best_mode[i]), 1e-300));
  }
  loss.wta = wta / b_eff;
  loss.cls = cls / b_eff;

  double aux_sum = 0.0;
  int aux_n = 0;
  if (use_aux) {
    for (int i = 0; i < b; ++i) {
      if (loss.best_mode[i] < 0) continue;
      for (int j = 0; j < 3 && j < batch[i]->aux_target.size(); ++j) {
        if (!batch[i]->aux_valid.empty() && !batch[i]->aux_valid[j]) continue;
        const double d = output.aux(i, j) - batch[i]->aux_target(j);
        aux_sum += d * d;
        ++aux_n;
      }
    }
    loss.aux = aux_n > 0 ? aux_sum / aux_n : 0.0;
  }
  loss.total = loss.wta + cfg.lambda_cls * loss.cls + (use_aux ? cfg.lambda_aux * loss.aux : 0.0);

  if (output_out) *output_out = output;
  if (flat_grads == nullptr) return loss;

  // Backward pass.
  Matrix d_disp = Matrix::Zero(b, cfg.modes * t_fut * 2);
  for (int i = 0; i < b; ++i) {
    const int k = loss.best_mode[i];
    if (k < 0) continue;
    Matrix d_traj = Matrix::Zero(1, t_fut * 2);
    const double scale = 1.0 / (static_cast<double>(n_valid[i]) * b_eff);
    for (int t = 0; t < t_fut; ++t) {
      if (!batch[i]->future_valid[t]) continue;
      const double dx = output.trajectories[k](i, t * 2) - batch[i]->gt_future(t, 0);
      const double dy = output.trajectories[k](i, t * 2 + 1) - batch[i]->gt_future(t, 1);
      const double norm = std::sqrt(dx * dx + dy * dy);
      if (norm <= 0.0) continue;
      d_traj(0, t * 2) = dx / norm * scale;
      d_traj(0, t * 2 + 1) = dy / norm * scale;
    }
    // Cumulative-sum backward: suffix sums per coordinate.
    for (int t = t_fut - 2; t >= 0; --t) {
      d_traj(0, t * 2) += d_traj(0, (t + 1) * 2);
      d_traj(0, t * 2 + 1) += d_traj(0, (t + 1) * 2 + 1);
    }
    d_disp.block(i, k * t_fut * 2, 1, t_fut * 2) = d_traj;
  }

  Matrix d_conf_logits = Matrix::Zero(b, cfg.modes);
  for (int i = 0; i < b; ++i) {
    if (loss.best_mode[i] < 0) continue;
    d_conf_logits.row(i) = cache.conf_softmax.row(i) * (cfg.lambda_cls / b_eff);
    d_conf_logits(i, loss.best_mode[i]) -= cfg.lambda_cls / b_eff;
  }

  Matrix d_aux = Matrix::Zero(b, 3);
  if (use_aux && aux_n > 0) {
    for (int i = 0; i < b; ++i) {
      if (loss.best_mode[i] < 0) continue;
      for (int j = 0; j < 3 && j < batch[i]->aux_target.size(); ++j) {
        if (!batch[i]->aux_valid.empty() && !batch[i]->aux_valid[j]) continue;
        d_aux(i, j) =
            cfg.lambda_aux * 2.0 * (output.aux(i, j) - batch[i]->aux_target(j)) / aux_n;
      }
    }
  }

  NetGrads g_mode, g_conf, g_aux;
  Matrix d_hprime = model.mode_head.backward(cache.mode_cache, d_disp, &g_mode);
  d_hprime += model.conf_head.backward(cache.conf_cache, d_conf_logits, &g_conf);
  d_hprime += model.aux_head.backward(cache.aux_cache, d_aux, &g_aux);

  NetGrads g_encoder = zero_grads_like(model.encoder);
  NetGrads g_gating = zero_grads_like(model.gating);
  std::vector<std::vector<NetGrads>> g_bank(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (int m = 0; m < cfg.m_modules; ++m) g_bank[l].push_back(zero_grads_like(model.bank[l][m]));
  }
  NetGrads g_proj = zero_grads_like(model.projection);

  Matrix d_h;
  if (use_tmn) {
    NetGrads g_proj_local;
    Matrix d_concat = model.projection.backward(cache.proj_cache, d_hprime, &g_proj_local);
    g_proj = std::move(g_proj_local);
    d_h = d_hprime;  // residual branch

    std::vector<std::vector<Matrix>> d_out(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
      d_out[l].assign(cfg.m_modules, Matrix::Zero(b, cfg.d_mod));
    }
    for (int m = 0; m < cfg.m_modules; ++m) {
      d_out[cfg.n_layers - 1][m] = d_concat.middleCols(m * cfg.d_mod, cfg.d_mod);
    }

    Matrix d_logits = Matrix::Zero(b, cache.logits.cols());
    for (int l = cfg.n_layers - 1; l >= 1; --l) {
      for (int m = 0; m < cfg.m_modules; ++m) {
        NetGrads g_local;
        const Matrix d_mixed = model.bank[l][m].backward(cache.module_cache[l][m], d_out[l][m], &g_local);
        accumulate(&g_bank[l][m], g_local);
        const Matrix& w = cache.weights[l - 1][m];
        Matrix d_w(b, cfg.m_modules);
        for (int j = 0; j < cfg.m_modules; ++j) {
          d_out[l - 1][j] += (d_mixed.array().colwise() * w.col(j).array()).matrix();
          d_w.col(j) = d_mixed.cwiseProduct(cache.out[l - 1][j]).rowwise().sum();
        }
        // Softmax backward per row over the module's source weights.
        const int group = ((l - 1) * cfg.m_modules + m) * cfg.m_modules;
        for (int i = 0; i < b; ++i) {
          const double dot = d_w.row(i).dot(w.row(i));
          d_logits.row(i).segment(group, cfg.m_modules) =
              w.row(i).cwiseProduct(d_w.row(i).array().matrix() -
                                    Eigen::RowVectorXd::Constant(cfg.m_modules, dot));
        }
      }
    }
    for (int m = 0; m < cfg.m_modules; ++m) {
      NetGrads g_local;
      d_h += model.bank[0][m].backward(cache.module_cache[0][m], d_out[0][m], &g_local);
      accumulate(&g_bank[0][m], g_local);
    }
    NetGrads g_gating_local;
    model.gating.backward(cache.gating, d_logits, &g_gating_local);
    g_gating = std::move(g_gating_local);
  } else {
    d_h = d_hprime;
  }

  NetGrads g_encoder_local;
  model.encoder.backward(cache.encoder, d_h, &g_encoder_local);
  g_encoder = std::move(g_encoder_local);

  flat_grads->clear();
  append_gradients(g_encoder, flat_grads);
  append_gradients(g_gating, flat_grads);
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (int m = 0; m < cfg.m_modules; ++m) append_gradients(g_bank[l][m], flat_grads);
  }
  append_gradients(g_proj, flat_grads);
  append_gradients(g_mode, flat_grads);
  append_gradients(g_conf, flat_grads);
  append_gradients(g_aux, flat_grads);
  return loss;
}

namespace {

double validation_brier(const PredictorModel& model, const std::vector<TrainingExample>& val,
                        bool use_tmn) {
  if (val.empty()) throw ContractError("train_predictor: empty validation split");
  const int t_fut = model.time.t_fut;
  double total = 0.0;
  int count = 0;
  const int chunk = 256;
  for (size_t start = 0; start < val.size(); start += chunk) {
    const int b = static_cast<int>(std::min<size_t>(chunk, val.size() - start));
    Matrix inputs(b, model.input_width);
    Matrix gating(b, 2 * model.config.latent);
    gating.setZero();
    for (int i = 0; i < b; ++i) {
      inputs.row(i) = val[start + i].input.transpose();
      if (use_tmn) gating.row(i) = val[start + i].gating_input.transpose();
    }
    const PredictorOutput out = predictor_forward(model, inputs, gating, use_tmn);
    for (int i = 0; i < b; ++i) {
      const TrainingExample& ex = val[start + i];
      bool any_valid = false;
      for (int t = 0; t < t_fut; ++t) any_valid = any_valid || ex.future_valid[t];
      if (!any_valid) continue;
      std::vector<Matrix> modes;
      for (int k = 0; k < model.config.modes; ++k) {
        Matrix traj(t_fut, 2);
        for (int t = 0; t < t_fut; ++t) {
          traj(t, 0) = out.trajectories[k](i, t * 2);
          traj(t, 1) = out.trajectories[k](i, t * 2 + 1);
        }
        modes.push_back(std::move(traj));
      }
      const ModeMetrics m =
          min_metrics(modes, out.confidences.row(i).transpose(), ex.gt_future, ex.future_valid);
      total += m.brier_fde;
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

}  // namespace

TrainedPredictor train_predictor(const std::vector<TrainingExample>& train,
                                 const std::vector<TrainingExample>& val,
                                 const PredictorConfig& config, const TimeConfig& time,
                                 uint64_t seed) {
  if (train.empty()) throw ContractError("train_predictor: empty train split");
  TrainedPredictor out;
  out.model = PredictorModel::create(config, time, static_cast<int>(train[0].input.size()), seed);

  std::vector<double> params = predictor_parameters(out.model);
  SgdMomentum optimizer(params.size(), config.momentum);
  Rng shuffle_rng(Rng::substream(seed, "predictor_train"));

  std::vector<int> indices(train.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<double> best_params = params;
  double best_brier = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, epoch / std::max(1, config.lr_step));
    shuffle_rng.shuffle(indices);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < indices.size(); start += config.batch) {
      const size_t end = std::min(indices.size(), start + config.batch);
      std::vector<const TrainingExample*> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(&train[indices[i]]);
      std::vector<double> grads;
      const PredictorLoss loss =
          predictor_train_step(out.model, batch, config.use_tmn, config.use_aux, &grads);
      optimizer.step(&params, grads, lr);
      set_predictor_parameters(&out.model, params);
      epoch_loss += loss.total;
      ++batches;
    }
    EpochLog log;
    log.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
    log.val_brier_fde = validation_brier(out.model, val, config.use_tmn);
    out.log.push_back(log);
    if (log.val_brier_fde < best_brier) {
      best_brier = log.val_brier_fde;
      best_params = params;
      out.best_epoch = epoch;
    }
  }
  set_predictor_parameters(&out.model, best_params);
  return out;
}

namespace {

void write_hexfloat(std::ostream& os, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  os << buf;
}

}  // namespace

void save_predictor(const PredictorModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  const PredictorConfig& c = model.config;
  os << "ctxbench-predictor v1\n";
  os << "config " << c.d_h << ' ' << c.d_mod << ' ' << c.n_layers << ' ' << c.m_modules << ' '
     << c.gating_hidden << ' ' << c.encoder_hidden << ' ' << c.k_neighbors << ' ' << c.modes << ' '
     << c.latent << ' ' << c.lambda_cls << ' ' << c.lambda_aux << ' ' << c.use_tmn << ' '
     << c.use_aux << '\n';
  os << "time " << model.time.t_hist << ' ' << model.time.t_fut << ' ' << model.time.dt << '\n';
  os << "input_width " << model.input_width << '\n';
  os << "seed " << model.seed << '\n';
  os << "manifest_hash " << model.manifest_hash << '\n';
  os << "ego_fingerprint " << model.ego_encoder_fingerprint << '\n';
  os << "social_fingerprint " << model.social_encoder_fingerprint << '\n';
  const std::vector<double> params = predictor_parameters(model);
  os << "params " << params.size();
  for (const double v : params) {
    os << ' ';
    write_hexfloat(os, v);
  }
  os << '\n';
}

PredictorModel load_predictor(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open checkpoint: " + path);
  std::string magic, version, tag;
  is >> magic >> version;
  if (magic != "ctxbench-predictor" || version != "v1") {
    throw ParseError("predictor checkpoint: bad header in " + path);
  }
  PredictorConfig c;
  is >> tag >> c.d_h >> c.d_mod >> c.n_layers >> c.m_modules >> c.gating_hidden >>
      c.encoder_hidden >> c.k_neighbors >> c.modes >> c.latent >> c.lambda_cls >> c.lambda_aux >>
      c.use_tmn >> c.use_aux;
  TimeConfig time;
  is >> tag >> time.t_hist >> time.t_fut >> time.dt;
  int input_width = 0;
  uint64_t seed = 0, manifest_hash = 0, ego_fp = 0, social_fp = 0;
  is >> tag >> input_width;
  is >> tag >> seed;
  is >> tag >> manifest_hash;
  is >> tag >> ego_fp;
  is >> tag >> social_fp;
  PredictorModel model = PredictorModel::create(c, time, input_width, seed);
  model.manifest_hash = manifest_hash;
  model.ego_encoder_fingerprint = ego_fp;
  model.social_encoder_fingerprint = social_fp;
  size_t count = 0;
  is >> tag >> count;
  if (tag != "params") throw ParseError("predictor checkpoint: missing params");
  std::vector<double> params(count);
  for (size_t i = 0; i < count; ++i) {
    std::string tok;
    if (!(is >> tok)) throw ParseError("predictor checkpoint: truncated params");
    params[i] = std::strtod(tok.c_str(), nullptr);
  }
  set_predictor_parameters(&model, params);
  return model;
}

}  // namespace ctxbench
