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

#ifndef CTXBENCH_SOCIAL_FEATURES_HPP_
#define CTXBENCH_SOCIAL_FEATURES_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ctxbench/ego_features.hpp"
#include "ctxbench/scenario.hpp"

namespace ctxbench {

enum class GeometryBase { kCollinear, kParallel, kOpposite, kCrossing };
enum class GeometryVariant { kLeading, kTrailing, kHeadOn, kLeft, kRight };

struct GeometryType {
  GeometryBase base = GeometryBase::kCollinear;
  GeometryVariant variant = GeometryVariant::kLeading;

  bool operator==(const GeometryType&) const = default;
};

// The nine leaf labels, in slot order: collinear_leading, collinear_trailing,
// collinear_head_on, parallel_left, parallel_right, opposite_left,
// opposite_right, crossing_left, crossing_right.
inline constexpr int kNumGeometryLeaves = 9;
int geometry_leaf_index(const GeometryType& g);
GeometryType geometry_from_leaf(int leaf);
std::string geometry_leaf_name(int leaf);

struct ConflictPoint {
  bool exists = false;
  Vec2 location;              // world frame; zeroed when !exists
  double distance = 0.0;      // from the focal position
  Vec2 relative_position;     // location in the focal pose frame
  double bearing = 0.0;       // bearing to the location minus focal heading
  double ttcp_focal = 0.0;    // s, time for the focal agent to reach the location
  double ttcp_other = 0.0;    // s
  double delta_ttcp = 0.0;    // |ttcp_focal - ttcp_other|, >= 0
};

// One retained neighbor for a geometry leaf.
struct InteractionSlot {
  std::string agent_id;
  AgentType other_type = AgentType::kVehicle;
  double distance = 0.0;  // final-pose distance
  // Kinematic differences (other minus focal) in the focal final-pose frame.
  RelativeKinematics rel_final;
  // Differences expressed in the focal agent's pose frame at each timestep.
  std::vector<double> per_pose_px, per_pose_py, per_pose_vx, per_pose_vy;
  std::vector<double> closing_speed;  // m/s, positive when approaching
  std::vector<double> delta_ttcp_series;  // only steps where a conflict exists
  ConflictPoint conflict;  // projected from the final history states
};

struct InteractionFeatureSet {
  int density = 0;  // non-stationary agents within the interaction radius
  std::array<std::optional<InteractionSlot>, kNumGeometryLeaves> slots;
};

// Classifies the pair geometry at the final history step. Threshold
// comparisons are inclusive toward the same-direction/opposite (collinear
// capable) classes and toward collinear laterally.
GeometryType classify_geometry(const Pose& focal, const Pose& other, const FeatureConfig& config);

// Per-timestep closing speed over the overlapping valid history of the two
// interpolated tracks: -d/dt of inter-agent distance.
std::vector<double> closing_speed(const AgentTrack& focal, const AgentTrack& other,
                                  const TimeConfig& time);

// Constant-velocity projection of both agents over the conflict horizon.
// When the forward rays intersect inside the horizon the conflict location is
// the intersection point; otherwise it is the midpoint of the two positions
// at the closest-approach time, which must fall within the conflict radius.
ConflictPoint project_conflict_point(const AgentState& focal, const AgentState& other,
                                     const Pose& focal_pose, const FeatureConfig& config);

// Closed-form closest-approach time over [0, horizon] for two constant
// velocity agents (exposed for verification against grid search).
double closest_approach_time(const AgentState& focal, const AgentState& other, double horizon);

InteractionFeatureSet select_interactions(const Scenario& scenario, const std::string& focal_id,
                                          const TimeConfig& time, const FeatureConfig& config);

}  // namespace ctxbench

#endif  // CTXBENCH_SOCIAL_FEATURES_HPP_
