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

#ifndef CTXBENCH_SPLITS_HPP_
#define CTXBENCH_SPLITS_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctxbench/clustering.hpp"
#include "ctxbench/difficulty.hpp"

namespace ctxbench {

enum class SplitSetting { kClosedWorld, kOpenWorld };
enum class SplitAssignment { kTrain, kVal, kTest };

const char* split_setting_name(SplitSetting s);
const char* split_assignment_name(SplitAssignment a);

struct HoldoutStep {
  Axis axis = Axis::kEgo;
  int context = 0;
  double mean_difficulty = 0.0;
  int agents_removed = 0;
  std::vector<int> added_back;  // paired context ids returned to the seen pool
};

struct SplitManifest {
  SplitSetting setting = SplitSetting::kOpenWorld;
  double test_fraction = 0.0;
  double val_fraction = 0.0;
  uint64_t seed = 0;
  std::map<AgentKey, SplitAssignment> assignment;
  std::set<std::pair<int, int>> seen_pairs;
  std::set<std::pair<int, int>> unseen_pairs;
  std::vector<HoldoutStep> trace;
  std::vector<std::pair<int, int>> moved_back;  // closed-world condition repairs

  uint64_t content_hash() const;
};

// Alternates between holding out the not-yet-held-out ego context with the
// highest mean difficulty and its social counterpart until the held-out agent
// count reaches the target (overshoot allowed on the final step). Every
// unseen pair ends with at least one marginal entirely absent from seen.
SplitManifest build_open_world(const std::vector<ContextLabel>& labels,
                               const ContextDifficulty& difficulties, double test_fraction,
                               double val_fraction, uint64_t seed);

// Same greedy loop, but each held-out context returns the first half of its
// co-occurring paired contexts (ceil, canonical id order) to the seen pool,
// so both marginals of every unseen pair stay represented in seen.
SplitManifest build_closed_world(const std::vector<ContextLabel>& labels,
                                 const ContextDifficulty& difficulties, double test_fraction,
                                 double val_fraction, uint64_t seed);

// Seeded uniform agent-level train/val assignment by shuffled prefix.
std::map<AgentKey, SplitAssignment> partition_train_val(const std::vector<AgentKey>& seen_agents,
                                                        double val_fraction, uint64_t seed);

struct SplitReport {
  std::vector<std::string> violations;
  double test_mean_difficulty = 0.0;
  double val_mean_difficulty = 0.0;
  double seen_mean_difficulty = 0.0;
  double test_val_ratio = 0.0;  // informational

  bool ok() const { return violations.empty(); }
};

// Structural checks: pair disjointness, per-setting composition condition,
// and agent-assignment consistency. The difficulty ratio is reported, never
// asserted.
SplitReport verify_split(const SplitManifest& manifest, const std::vector<ContextLabel>& labels,
                         const std::vector<DifficultyRecord>& records);

void save_manifest(const SplitManifest& manifest, const std::string& path);
SplitManifest load_manifest(const std::string& path);

}  // namespace ctxbench

#endif  // CTXBENCH_SPLITS_HPP_
