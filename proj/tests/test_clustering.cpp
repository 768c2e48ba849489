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

#include <doctest.h>

#include <cmath>

#include "ctxbench/clustering.hpp"
#include "ctxbench/errors.hpp"

using namespace ctxbench;

namespace {

Matrix points_1d(const std::vector<double>& xs) {
  Matrix m(xs.size(), 1);
  for (size_t i = 0; i < xs.size(); ++i) m(static_cast<int>(i), 0) = xs[i];
  return m;
}

}  // namespace

TEST_CASE("kmeans separates two tight pairs") {
  const Matrix pts = points_1d({0.0, 0.1, 10.0, 10.1});
  const KMeansResult km = kmeans(pts, 2, 3);
  std::vector<double> centers = {km.centroids(0, 0), km.centroids(1, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0] == doctest::Approx(0.05));
  CHECK(centers[1] == doctest::Approx(10.05));
  CHECK(km.assignment[0] == km.assignment[1]);
  CHECK(km.assignment[2] == km.assignment[3]);
  CHECK(km.assignment[0] != km.assignment[2]);
}

TEST_CASE("k equal to the point count reaches zero inertia") {
  const Matrix pts = points_1d({1.0, 5.0, 9.0, 13.0});
  const KMeansResult km = kmeans(pts, 4, 1);
  CHECK(km.inertia_trace.back() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kmeans rejects fewer points than clusters") {
  const Matrix pts = points_1d({1.0, 2.0});
  CHECK_THROWS_AS(kmeans(pts, 3, 1), ContractError);
}

TEST_CASE("final assignment maps every point to its nearest centroid") {
  Rng rng(5);
  Matrix pts(60, 3);
  for (int i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-10, 10);
  }
  const KMeansResult km = kmeans(pts, 5, 17);
  for (int i = 0; i < pts.rows(); ++i) {
    CHECK(km.assignment[i] == nearest_centroid(km.centroids, pts.row(i)));
  }
}

TEST_CASE("Lloyd inertia is non-increasing on random runs") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix pts(40 + trial, 2);
    for (int i = 0; i < pts.rows(); ++i) {
      pts(i, 0) = rng.uniform(-20, 20);
      pts(i, 1) = rng.uniform(-20, 20);
    }
    const KMeansResult km = kmeans(pts, 4, 100 + trial);
    for (size_t i = 1; i < km.inertia_trace.size(); ++i) {
      CHECK(km.inertia_trace[i] <= km.inertia_trace[i - 1] + 1e-9);
    }
    CHECK(km.iterations <= 300);
  }
}

TEST_CASE("cluster ids are canonicalized by descending size") {
  // 6 points near zero, 2 near ten: cluster 0 must be the big one.
  const Matrix pts = points_1d({0.0, 0.1, 0.2, 0.05, 0.15, 0.08, 10.0, 10.1});
  const KMeansResult km = kmeans(pts, 2, 9);
  int count0 = 0, count1 = 0;
  for (const int a : km.assignment) (a == 0 ? count0 : count1)++;
  CHECK(count0 > count1);
}

TEST_CASE("silhouette of two tight far clusters is near one") {
  const Matrix pts = points_1d({0.0, 1e-6, 10.0, 10.0 + 1e-6});
  const std::vector<int> assign = {0, 0, 1, 1};
  CHECK(silhouette(pts, assign) > 0.99);
}

TEST_CASE("silhouette of identical points across two clusters is zero") {
  const Matrix pts = points_1d({5.0, 5.0, 5.0, 5.0});
  const std::vector<int> assign = {0, 1, 0, 1};
  CHECK(silhouette(pts, assign) == 0.0);
}

TEST_CASE("silhouette on a single cluster is an error") {
  const Matrix pts = points_1d({1.0, 2.0});
  CHECK_THROWS_AS(silhouette(pts, {0, 0}), ContractError);
}

TEST_CASE("random labels on uniform data score near zero") {
  Rng rng(11);
  Matrix pts(200, 2);
  std::vector<int> labels(200);
  for (int i = 0; i < 200; ++i) {
    pts(i, 0) = rng.uniform(0, 1);
    pts(i, 1) = rng.uniform(0, 1);
    labels[i] = static_cast<int>(rng.uniform_int(0, 3));
  }
  CHECK(std::abs(silhouette(pts, labels)) < 0.1);
}

TEST_CASE("assign_contexts uses per-type models and flattens ids") {
  ContextModel ego_v{Axis::kEgo, AgentType::kVehicle, 2, points_1d({0.0, 10.0})};
  ContextModel ego_p{Axis::kEgo, AgentType::kPedestrian, 2, points_1d({0.0, 10.0})};
  ContextModel soc_v{Axis::kSocial, AgentType::kVehicle, 2, points_1d({0.0, 10.0})};
  ContextModel soc_p{Axis::kSocial, AgentType::kPedestrian, 2, points_1d({0.0, 10.0})};

  AgentLatents vehicle;
  vehicle.key = {"s0", "a0"};
  vehicle.agent_type = AgentType::kVehicle;
  vehicle.ego = Eigen::RowVectorXd::Constant(1, 9.5);
  vehicle.social = Eigen::RowVectorXd::Constant(1, 0.2);
  AgentLatents ped = vehicle;
  ped.key = {"s0", "a1"};
  ped.agent_type = AgentType::kPedestrian;

  const auto labels = assign_contexts({vehicle, ped}, {ego_v, ego_p}, {soc_v, soc_p});
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].c_e == 1);       // vehicle type index 0
  CHECK(labels[0].c_s == 0);
  CHECK(labels[1].c_e == 2 + 1);   // pedestrian ids offset by type_index * k
  CHECK(labels[1].c_s == 2 + 0);
}

TEST_CASE("assign_contexts ties break toward the lower cluster id") {
  ContextModel ego{Axis::kEgo, AgentType::kVehicle, 2, points_1d({-1.0, 1.0})};
  ContextModel soc{Axis::kSocial, AgentType::kVehicle, 2, points_1d({-1.0, 1.0})};
  AgentLatents agent;
  agent.key = {"s", "a"};
  agent.agent_type = AgentType::kVehicle;
  agent.ego = Eigen::RowVectorXd::Constant(1, 0.0);  // equidistant
  agent.social = Eigen::RowVectorXd::Constant(1, 0.0);
  const auto labels = assign_contexts({agent}, {ego}, {soc});
  CHECK(labels[0].c_e == 0);
  CHECK(labels[0].c_s == 0);
}

TEST_CASE("assign_contexts requires a model for every agent type present") {
  ContextModel ego{Axis::kEgo, AgentType::kVehicle, 2, points_1d({-1.0, 1.0})};
  ContextModel soc{Axis::kSocial, AgentType::kVehicle, 2, points_1d({-1.0, 1.0})};
  AgentLatents cyclist;
  cyclist.key = {"s", "c"};
  cyclist.agent_type = AgentType::kCyclist;
  cyclist.ego = Eigen::RowVectorXd::Constant(1, 0.0);
  cyclist.social = Eigen::RowVectorXd::Constant(1, 0.0);
  CHECK_THROWS_AS(assign_contexts({cyclist}, {ego}, {soc}), ContractError);
}

TEST_CASE("label tables round-trip through csv") {
  std::vector<ContextLabel> labels;
  ContextLabel l;
  l.key = {"s01", "ego"};
  l.agent_type = AgentType::kCyclist;
  l.c_e = 24;
  l.c_s = 3;
  labels.push_back(l);
  const std::string path = "/tmp/ctxbench_test_labels.csv";
  write_label_table(labels, path);
  const auto loaded = read_label_table(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].key == labels[0].key);
  CHECK(loaded[0].agent_type == AgentType::kCyclist);
  CHECK(loaded[0].c_e == 24);
  CHECK(loaded[0].c_s == 3);
}

TEST_CASE("kmeans assignments are reproducible bit-exactly") {
  Rng rng(13);
  Matrix pts(80, 4);
  for (int i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < 4; ++j) pts(i, j) = rng.normal(0, 2);
  }
  const KMeansResult a = kmeans(pts, 6, 42);
  const KMeansResult b = kmeans(pts, 6, 42);
  CHECK(a.assignment == b.assignment);
  CHECK((a.centroids - b.centroids).norm() == 0.0);
}
