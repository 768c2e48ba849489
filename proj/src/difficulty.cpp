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

#include "ctxbench/difficulty.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"

namespace ctxbench {

std::vector<Vec2> kalman_forecast(const AgentTrack& track, const TimeConfig& time,
                                  const KalmanConfig& config) {
  std::vector<int> obs;
  const int n_hist = std::min<int>(time.t_hist, static_cast<int>(track.states.size()));
  for (int t = 0; t < n_hist; ++t) {
    if (track.states[t].valid) obs.push_back(t);
  }
  if (obs.size() < 2) {
    throw ContractError("kalman_forecast: needs >= 2 valid history observations");
  }

  const double dt = time.dt;
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  const double q2 = config.process_noise * config.process_noise;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = q(1, 1) = q2 * dt * dt * dt * dt / 4.0;
  q(0, 2) = q(2, 0) = q(1, 3) = q(3, 1) = q2 * dt * dt * dt / 2.0;
  q(2, 2) = q(3, 3) = q2 * dt * dt;
  const double r2 = config.measurement_noise * config.measurement_noise;
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * r2;
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;

  const int i0 = obs[0];
  const int i1 = obs[1];
  const Vec2 p0 = track.states[i0].position;
  const Vec2 p1 = track.states[i1].position;
  Eigen::Vector4d x;
  x << p0.x, p0.y, (p1.x - p0.x) / ((i1 - i0) * dt), (p1.y - p0.y) / ((i1 - i0) * dt);
  Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
  p(0, 0) = p(1, 1) = r2;
  p(2, 2) = p(3, 3) = 1.0;

  size_t next_obs = 1;
  for (int t = i0 + 1; t < n_hist; ++t) {
    x = f * x;
    p = f * p * f.transpose() + q;
    if (next_obs < obs.size() && obs[next_obs] == t) {
      const Vec2& z = track.states[t].position;
      const Eigen::Vector2d innovation(z.x - x(0), z.y - x(1));
      const Eigen::Matrix2d s = h * p * h.transpose() + r;
      const Eigen::Matrix<double, 4, 2> k = p * h.transpose() * s.inverse();
      x += k * innovation;
      p = (Eigen::Matrix4d::Identity() - k * h) * p;
      ++next_obs;
    }
  }

  std::vector<Vec2> future;
  future.reserve(time.t_fut);
  for (int s = 0; s < time.t_fut; ++s) {
    x = f * x;
    future.push_back({x(0), x(1)});
  }
  return future;
}

DifficultyRecord kalman_difficulty(const AgentTrack& track, const TimeConfig& time,
                                   const KalmanConfig& config) {
  DifficultyRecord record;
  record.key.agent_id = track.agent_id;
  record.agent_type = track.agent_type;

  for (const double h : config.horizons) {
    const int steps = static_cast<int>(std::llround(h / time.dt));
    if (steps > time.t_fut) {
      throw ContractError("kalman_difficulty: horizon exceeds the future span");
    }
  }

  const std::vector<Vec2> forecast = kalman_forecast(track, time, config);
  double sum = 0.0;
  int available = 0;
  for (const double h : config.horizons) {
    const int target = static_cast<int>(std::llround(h / time.dt)) - 1;  // future index
    int idx = target;
    while (idx >= 0 && !track.states[time.t_hist + idx].valid) --idx;
    if (idx < 0) {
      record.horizon_fde.push_back(std::nullopt);
      continue;
    }
    const Vec2 gt = track.states[time.t_hist + idx].position;
    const double fde = (forecast[idx] - gt).norm();
    record.horizon_fde.push_back(fde);
    sum += fde;
    ++available;
  }
  if (available == 0) {
    record.excluded = true;
    record.difficulty = 0.0;
  } else {
    record.difficulty = sum / available;
  }
  return record;
}

ContextDifficulty context_difficulty(const std::vector<ContextLabel>& labels,
                                     const std::vector<DifficultyRecord>& records) {
  std::map<AgentKey, const DifficultyRecord*> by_key;
  for (const auto& r : records) by_key[r.key] = &r;
  if (by_key.size() != records.size()) throw ContractError("context_difficulty: duplicate keys");
  if (labels.size() != records.size()) {
    throw ContractError("context_difficulty: labels and difficulty records do not share keys");
  }

  ContextDifficulty out;
  for (const auto& label : labels) {
    const auto it = by_key.find(label.key);
    if (it == by_key.end()) {
      throw ContractError("context_difficulty: no difficulty record for agent " +
                          label.key.scenario_id + "/" + label.key.agent_id);
    }
    if (it->second->excluded) continue;
    const double d = it->second->difficulty;
    out.ego_mean[label.c_e] += d;
    out.ego_count[label.c_e] += 1;
    out.social_mean[label.c_s] += d;
    out.social_count[label.c_s] += 1;
  }
  for (auto& [ctx, sum] : out.ego_mean) sum /= out.ego_count[ctx];
  for (auto& [ctx, sum] : out.social_mean) sum /= out.social_count[ctx];
  return out;
}

void write_difficulty_table(const std::vector<DifficultyRecord>& records,
                            const KalmanConfig& config, const std::string& path) {
  CsvTable table;
  table.header = {"scenario_id", "agent_id", "agent_type"};
  for (const double h : config.horizons) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fde_%gs", h);
    table.header.push_back(buf);
  }
  table.header.push_back("difficulty");
  table.header.push_back("excluded");
  for (const auto& r : records) {
    std::vector<std::string> row = {r.key.scenario_id, r.key.agent_id,
                                    agent_type_name(r.agent_type)};
    for (const auto& fde : r.horizon_fde) {
      row.push_back(fde ? format_double(*fde) : "");
    }
    row.push_back(format_double(r.difficulty));
    row.push_back(r.excluded ? "1" : "0");
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

std::vector<DifficultyRecord> read_difficulty_table(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_sid = table.column("scenario_id");
  const int c_aid = table.column("agent_id");
  const int c_type = table.column("agent_type");
  const int c_diff = table.column("difficulty");
  const int c_excl = table.column("excluded");
  std::vector<int> fde_cols;
  for (size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i].rfind("fde_", 0) == 0) fde_cols.push_back(static_cast<int>(i));
  }
  std::vector<DifficultyRecord> records;
  for (const auto& row : table.rows) {
    DifficultyRecord r;
    r.key = {row[c_sid], row[c_aid]};
    r.agent_type = agent_type_from_name(row[c_type]);
    for (const int c : fde_cols) {
      if (row[c].empty()) {
        r.horizon_fde.push_back(std::nullopt);
      } else {
        r.horizon_fde.push_back(std::stod(row[c]));
      }
    }
    r.difficulty = std::stod(row[c_diff]);
    r.excluded = row[c_excl] == "1";
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ctxbench
