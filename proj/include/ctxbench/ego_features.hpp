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

#ifndef CTXBENCH_EGO_FEATURES_HPP_
#define CTXBENCH_EGO_FEATURES_HPP_

#include <array>
#include <optional>
#include <vector>

#include "ctxbench/scenario.hpp"

namespace ctxbench {

struct FeatureConfig {
  double heading_thresh = kPi / 6.0;     // 30 degrees
  double lane_lateral_thresh = 6.5;      // m
  double interaction_radius = 50.0;      // m
  double collinear_lateral = 3.25;       // m
  double conflict_horizon = 10.0;        // s
  double stationary_floor = 0.5;         // m/s, below this an agent is stationary
  double speed_floor = 0.1;              // m/s, numeric guard for heading/curvature/TTCP
  double conflict_radius = 2.0;          // m, closest-approach separation for a conflict
};

// History kinematics of one agent expressed in a reference frame, covering
// the agent's contiguous valid history span.
struct RelativeKinematics {
  int span_start = 0;  // first timestep of the span
  std::vector<double> px, py, vx, vy, ax, ay;
  std::vector<double> curvature;  // 1/m, zero under the speed floor

  size_t size() const { return px.size(); }
};

struct LaneAssignment {
  int lane_ref = -1;  // index into Scenario::map
  std::vector<double> frenet_s;
  std::vector<double> frenet_d;
  std::vector<double> compliance;  // (speed - limit) / limit; zeros without a limit
  double heading_diff = 0.0;       // |heading difference| at assignment
  double lateral_offset = 0.0;     // signed frenet d at assignment
};

struct TcdProximity {
  MapKind kind = MapKind::kCrosswalk;
  double distance = 0.0;          // m, >= 0
  double relative_heading = 0.0;  // bearing to nearest point minus pose heading, (-pi, pi]
  bool is_forward = false;        // nearest point has x > 0 in the pose frame
};

struct EgoFeatureSet {
  RelativeKinematics kinematics;
  std::optional<LaneAssignment> lane;
  std::array<std::optional<TcdProximity>, kNumTcdKinds> tcd_closest;
  std::array<std::optional<TcdProximity>, kNumTcdKinds> tcd_forward;
};

// Frenet projection of a point onto a polyline: arc length s from the first
// vertex and signed lateral offset d (positive left of travel direction).
struct FrenetPoint {
  double s = 0.0;
  double d = 0.0;
  size_t segment = 0;
  double heading = 0.0;  // tangent heading at the projection
};

FrenetPoint frenet_project(const Vec2& point, const MapPolyline& lane);
Vec2 frenet_to_world(const FrenetPoint& f, const MapPolyline& lane);

// Rotates/translates the agent's valid history into the pose frame and
// attaches per-step curvature. The track must already be interpolated.
RelativeKinematics relative_kinematics(const AgentTrack& track, const Pose& pose,
                                       const TimeConfig& time, const FeatureConfig& config);

// Lane passing both the heading and lateral thresholds at the final pose with
// the smallest |lateral offset|; ties break on smaller heading difference,
// then lower polyline index. Absent when no lane qualifies.
std::optional<LaneAssignment> assign_lane(const AgentTrack& track,
                                          const std::vector<MapPolyline>& map,
                                          const TimeConfig& time, const FeatureConfig& config);

struct TcdProximityResult {
  std::array<std::optional<TcdProximity>, kNumTcdKinds> closest;
  std::array<std::optional<TcdProximity>, kNumTcdKinds> forward;
};

TcdProximityResult tcd_proximity(const Pose& pose, const std::vector<MapPolyline>& map);

EgoFeatureSet extract_ego_features(const AgentTrack& interpolated_track,
                                   const std::vector<MapPolyline>& map, const TimeConfig& time,
                                   const FeatureConfig& config);

}  // namespace ctxbench

#endif  // CTXBENCH_EGO_FEATURES_HPP_
