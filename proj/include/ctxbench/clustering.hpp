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

#ifndef CTXBENCH_CLUSTERING_HPP_
#define CTXBENCH_CLUSTERING_HPP_

#include <string>
#include <vector>

#include "ctxbench/neural.hpp"
#include "ctxbench/scenario.hpp"
#include "ctxbench/vectorize.hpp"

namespace ctxbench {

struct KMeansResult {
  Matrix centroids;             // k x d, ids canonicalized by descending cluster size
  std::vector<int> assignment;  // per input row
  std::vector<double> inertia_trace;  // after each assignment step; non-increasing
  int iterations = 0;
};

// Seeded k-means++ initialization followed by Lloyd iterations until the
// assignment reaches a fixpoint or the iteration cap. Empty clusters are
// re-seeded to the point farthest from its assigned centroid.
KMeansResult kmeans(const Matrix& points, int k, uint64_t seed, int max_iterations = 300);

// Mean over points of (b - a) / max(a, b); 0/0 counts as 0 and singleton
// clusters contribute 0. Requires at least two non-empty clusters.
double silhouette(const Matrix& points, const std::vector<int>& assignment);

int nearest_centroid(const Matrix& centroids, const Eigen::RowVectorXd& point);

// One clustered context space per (axis, agent type).
struct ContextModel {
  Axis axis = Axis::kEgo;
  AgentType agent_type = AgentType::kVehicle;
  int k = 11;
  Matrix centroids;
};

struct AgentKey {
  std::string scenario_id;
  std::string agent_id;

  auto operator<=>(const AgentKey&) const = default;
};

struct ContextLabel {
  AgentKey key;
  AgentType agent_type = AgentType::kVehicle;
  int c_e = 0;  // flattened across agent types: type_index * k + cluster
  int c_s = 0;
};

struct AgentLatents {
  AgentKey key;
  AgentType agent_type = AgentType::kVehicle;
  Eigen::RowVectorXd ego;     // latent on the ego axis
  Eigen::RowVectorXd social;  // latent on the social axis
};

// Nearest-centroid labels for every focal agent using the model matching the
// agent's type on each axis; ids are flattened so they never collide across
// types. Ties go to the lower cluster id.
std::vector<ContextLabel> assign_contexts(const std::vector<AgentLatents>& latents,
                                          const std::vector<ContextModel>& ego_models,
                                          const std::vector<ContextModel>& social_models);

void write_label_table(const std::vector<ContextLabel>& labels, const std::string& path);
std::vector<ContextLabel> read_label_table(const std::string& path);

}  // namespace ctxbench

#endif  // CTXBENCH_CLUSTERING_HPP_
