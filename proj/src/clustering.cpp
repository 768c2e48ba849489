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

#include "ctxbench/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"

namespace ctxbench {

namespace {

double inertia_of(const Matrix& points, const Matrix& centroids, const std::vector<int>& assignment) {
  double total = 0.0;
  for (int i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(assignment[i])).squaredNorm();
  }
  return total;
}

Matrix kmeans_pp_init(const Matrix& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  Matrix centroids(k, points.cols());
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

  int first = static_cast<int>(rng.uniform_int(0, n - 1));
  centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], (points.row(i) - centroids.row(c - 1)).squaredNorm());
      total += min_d2[i];
    }
    int pick = n - 1;
    if (total > 0.0) {
      const double threshold = rng.uniform() * total;
      double cum = 0.0;
      for (int i = 0; i < n; ++i) {
        cum += min_d2[i];
        if (cum >= threshold) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(0, n - 1));
    }
    centroids.row(c) = points.row(pick);
  }
  return centroids;
}

}  // namespace

int nearest_centroid(const Matrix& centroids, const Eigen::RowVectorXd& point) {
  int best = 0;
  double best_d2 = (point - centroids.row(0)).squaredNorm();
  for (int j = 1; j < centroids.rows(); ++j) {
    const double d2 = (point - centroids.row(j)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return best;
}

KMeansResult kmeans(const Matrix& points, int k, uint64_t seed, int max_iterations) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw ContractError("kmeans: k must be >= 1");
  if (n < k) throw ContractError("kmeans: fewer points than clusters");

  Rng rng(seed);
  KMeansResult result;
  result.centroids = kmeans_pp_init(points, k, rng);
  result.assignment.assign(n, -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int a = nearest_centroid(result.centroids, points.row(i));
      if (a != result.assignment[i]) {
        result.assignment[i] = a;
        changed = true;
      }
    }
    result.inertia_trace.push_back(inertia_of(points, result.centroids, result.assignment));
    result.iterations = iter + 1;
    if (!changed) break;

    std::vector<int> counts(k, 0);
    Matrix sums = Matrix::Zero(k, points.cols());
    for (int i = 0; i < n; ++i) {
      sums.row(result.assignment[i]) += points.row(i);
      ++counts[result.assignment[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        result.centroids.row(j) = sums.row(j) / counts[j];
      } else {
        // Re-seed to the point farthest from its own centroid.
        int far = 0;
        double far_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d2 = (points.row(i) - result.centroids.row(result.assignment[i])).squaredNorm();
          if (d2 > far_d2) {
            far_d2 = d2;
            far = i;
          }
        }
        result.centroids.row(j) = points.row(far);
      }
    }
  }

  // Canonicalize cluster ids by descending size, ties by original id.
  std::vector<int> counts(k, 0);
  for (const int a : result.assignment) ++counts[a];
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&counts](int a, int b) { return counts[a] > counts[b]; });
  std::vector<int> remap(k);
  Matrix sorted(k, points.cols());
  for (int new_id = 0; new_id < k; ++new_id) {
    remap[order[new_id]] = new_id;
    sorted.row(new_id) = result.centroids.row(order[new_id]);
  }
  result.centroids = std::move(sorted);
  for (int& a : result.assignment) a = remap[a];
  return result;
}

double silhouette(const Matrix& points, const std::vector<int>& assignment) {
  const int n = static_cast<int>(points.rows());
  if (n != static_cast<int>(assignment.size())) throw ContractError("silhouette: size mismatch");
  std::map<int, std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters[assignment[i]].push_back(i);
  if (clusters.size() < 2) throw ContractError("silhouette: needs at least two clusters");

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& own = clusters[assignment[i]];
    if (own.size() == 1) continue;  // singleton contributes 0
    double a = 0.0;
    for (const int j : own) {
      if (j != i) a += (points.row(i) - points.row(j)).norm();
    }
    a /= static_cast<double>(own.size() - 1);

    double b = std::numeric_limits<double>::infinity();
    for (const auto& [cid, members] : clusters) {
      if (cid == assignment[i]) continue;
      double mean = 0.0;
      for (const int j : members) mean += (points.row(i) - points.row(j)).norm();
      b = std::min(b, mean / static_cast<double>(members.size()));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

std::vector<ContextLabel> assign_contexts(const std::vector<AgentLatents>& latents,
                                          const std::vector<ContextModel>& ego_models,
                                          const std::vector<ContextModel>& social_models) {
  auto find_model = [](const std::vector<ContextModel>& models, Axis axis, AgentType type)
      -> const ContextModel& {
    for (const auto& m : models) {
      if (m.axis == axis && m.agent_type == type) return m;
    }
    throw ContractError(std::string("assign_contexts: missing ") +
                        (axis == Axis::kEgo ? "ego" : "social") + " context model for type " +
                        agent_type_name(type));
  };

  std::vector<ContextLabel> labels;
  labels.reserve(latents.size());
  for (const auto& agent : latents) {
    const ContextModel& ego = find_model(ego_models, Axis::kEgo, agent.agent_type);
    const ContextModel& social = find_model(social_models, Axis::kSocial, agent.agent_type);
    ContextLabel label;
    label.key = agent.key;
    label.agent_type = agent.agent_type;
    const int type_index = static_cast<int>(agent.agent_type);
    label.c_e = type_index * ego.k + nearest_centroid(ego.centroids, agent.ego);
    label.c_s = type_index * social.k + nearest_centroid(social.centroids, agent.social);
    labels.push_back(std::move(label));
  }
  return labels;
}

void write_label_table(const std::vector<ContextLabel>& labels, const std::string& path) {
  CsvTable table;
  table.header = {"scenario_id", "agent_id", "agent_type", "c_e", "c_s"};
  for (const auto& l : labels) {
    table.rows.push_back({l.key.scenario_id, l.key.agent_id, agent_type_name(l.agent_type),
                          std::to_string(l.c_e), std::to_string(l.c_s)});
  }
  write_csv(path, table);
}

std::vector<ContextLabel> read_label_table(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int c_sid = table.column("scenario_id");
  const int c_aid = table.column("agent_id");
  const int c_type = table.column("agent_type");
  const int c_e = table.column("c_e");
  const int c_s = table.column("c_s");
  std::vector<ContextLabel> labels;
  for (const auto& row : table.rows) {
    ContextLabel l;
    l.key = {row[c_sid], row[c_aid]};
    l.agent_type = agent_type_from_name(row[c_type]);
    l.c_e = std::stoi(row[c_e]);
    l.c_s = std::stoi(row[c_s]);
    labels.push_back(std::move(l));
  }
  return labels;
}

}  // namespace ctxbench
