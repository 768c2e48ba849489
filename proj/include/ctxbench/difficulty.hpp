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

#ifndef CTXBENCH_DIFFICULTY_HPP_
#define CTXBENCH_DIFFICULTY_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxbench/clustering.hpp"
#include "ctxbench/scenario.hpp"

namespace ctxbench {

struct KalmanConfig {
  double process_noise = 1.0;     // white-acceleration std, m/s^2
  double measurement_noise = 0.1; // position std, m
  std::vector<double> horizons = {2.0, 4.0, 6.0};  // s
};

// Constant-velocity Kalman forecast: filter over the valid history positions,
// then pure prediction for t_fut steps. Needs >= 2 valid history observations.
std::vector<Vec2> kalman_forecast(const AgentTrack& track, const TimeConfig& time,
                                  const KalmanConfig& config);

struct DifficultyRecord {
  AgentKey key;
  AgentType agent_type = AgentType::kVehicle;
  std::vector<std::optional<double>> horizon_fde;  // aligned with config.horizons
  double difficulty = 0.0;  // mean of the available horizon errors
  bool excluded = false;    // no valid ground-truth future at all
};

// Final displacement error of the forecast at each horizon (falling back to
// the nearest earlier valid future step), averaged into the difficulty value.
DifficultyRecord kalman_difficulty(const AgentTrack& track, const TimeConfig& time,
                                   const KalmanConfig& config);

struct ContextDifficulty {
  // Mean difficulty and member count per context id, skipping excluded agents.
  std::map<int, double> ego_mean;
  std::map<int, int> ego_count;
  std::map<int, double> social_mean;
  std::map<int, int> social_count;
};

// Joins labels with difficulty records (keys must match exactly) and averages
// per ego context and per social context.
ContextDifficulty context_difficulty(const std::vector<ContextLabel>& labels,
                                     const std::vector<DifficultyRecord>& records);

void write_difficulty_table(const std::vector<DifficultyRecord>& records,
                            const KalmanConfig& config, const std::string& path);
std::vector<DifficultyRecord> read_difficulty_table(const std::string& path);

}  // namespace ctxbench

#endif  // CTXBENCH_DIFFICULTY_HPP_
