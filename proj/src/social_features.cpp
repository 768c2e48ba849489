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

#include "ctxbench/social_features.hpp"

#include <algorithm>
#include <cmath>

#include "ctxbench/errors.hpp"

namespace ctxbench {

int geometry_leaf_index(const GeometryType& g) {
  switch (g.base) {
    case GeometryBase::kCollinear:
      if (g.variant == GeometryVariant::kLeading) return 0;
      if (g.variant == GeometryVariant::kTrailing) return 1;
      return 2;  // head-on
    case GeometryBase::kParallel:
      return g.variant == GeometryVariant::kLeft ? 3 : 4;
    case GeometryBase::kOpposite:
      return g.variant == GeometryVariant::kLeft ? 5 : 6;
    case GeometryBase::kCrossing:
      return g.variant == GeometryVariant::kLeft ? 7 : 8;
  }
  return 0;
}

GeometryType geometry_from_leaf(int leaf) {
  switch (leaf) {
    case 0: return {GeometryBase::kCollinear, GeometryVariant::kLeading};
    case 1: return {GeometryBase::kCollinear, GeometryVariant::kTrailing};
    case 2: return {GeometryBase::kCollinear, GeometryVariant::kHeadOn};
    case 3: return {GeometryBase::kParallel, GeometryVariant::kLeft};
    case 4: return {GeometryBase::kParallel, GeometryVariant::kRight};
    case 5: return {GeometryBase::kOpposite, GeometryVariant::kLeft};
    case 6: return {GeometryBase::kOpposite, GeometryVariant::kRight};
    case 7: return {GeometryBase::kCrossing, GeometryVariant::kLeft};
    case 8: return {GeometryBase::kCrossing, GeometryVariant::kRight};
    default: throw ContractError("geometry_from_leaf: leaf out of range");
  }
}

std::string geometry_leaf_name(int leaf) {
  static const char* names[] = {"collinear_leading", "collinear_trailing", "collinear_head_on",
                                "parallel_left",     "parallel_right",     "opposite_left",
                                "opposite_right",    "crossing_left",      "crossing_right"};
  if (leaf < 0 || leaf >= kNumGeometryLeaves) throw ContractError("geometry leaf out of range");
  return names[leaf];
}

GeometryType classify_geometry(const Pose& focal, const Pose& other, const FeatureConfig& config) {
  const Vec2 rel = to_frame(other.position, focal);
  const double lon = rel.x;
  const double lat = rel.y;
  const double dth = normalize_angle(other.heading - focal.heading);
  const bool same_dir = std::abs(dth) <= config.heading_thresh;
  const bool opposite = std::abs(kPi - std::abs(dth)) <= config.heading_thresh;

  if (same_dir) {
    if (std::abs(lat) <= config.collinear_lateral) {
      return {GeometryBase::kCollinear,
              lon >= 0.0 ? GeometryVariant::kLeading : GeometryVariant::kTrailing};
    }
    return {GeometryBase::kParallel, lat > 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
  }
  if (opposite) {
    if (std::abs(lat) <= config.collinear_lateral) {
      return {GeometryBase::kCollinear, GeometryVariant::kHeadOn};
    }
    return {GeometryBase::kOpposite, lat > 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
  }
  return {GeometryBase::kCrossing, lat >= 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
}

std::vector<double> closing_speed(const AgentTrack& focal, const AgentTrack& other,
                                  const TimeConfig& time) {
  std::vector<double> out;
  const int n = std::min<int>(time.t_hist, static_cast<int>(std::min(focal.states.size(), other.states.size())));
  for (int t = 0; t < n; ++t) {
    if (!focal.states[t].valid || !other.states[t].valid) continue;
    const Vec2 dp = other.states[t].position - focal.states[t].position;
    const Vec2 dv = other.states[t].velocity - focal.states[t].velocity;
    const double dist = dp.norm();
    out.push_back(dist < 1e-6 ? 0.0 : -dp.dot(dv) / dist);
  }
  return out;
}

double closest_approach_time(const AgentState& focal, const AgentState& other, double horizon) {
  const Vec2 dp = other.position - focal.position;
  const Vec2 dv = other.velocity - focal.velocity;
  const double dv2 = dv.squared_norm();
  if (dv2 <= 0.0) return 0.0;
  return std::clamp(-dp.dot(dv) / dv2, 0.0, horizon);
}

namespace {

// Intersection of the two forward rays, if both agents reach it within the
// horizon. Returns the per-agent arrival times.
bool ray_intersection(const AgentState& a, const AgentState& b, double horizon, Vec2* loc,
                      double* ta, double* tb) {
  const double denom = a.velocity.cross(b.velocity);
  if (std::abs(denom) < 1e-12) return false;
  const Vec2 dp = b.position - a.position;
  const double t1 = dp.cross(b.velocity) / denom;
  const double t2 = dp.cross(a.velocity) / denom;
  if (t1 < 0.0 || t1 > horizon || t2 < 0.0 || t2 > horizon) return false;
  *loc = a.position + a.velocity * t1;
  *ta = t1;
  *tb = t2;
  return true;
}

}  // namespace

ConflictPoint project_conflict_point(const AgentState& focal, const AgentState& other,
                                     const Pose& focal_pose, const FeatureConfig& config) {
  ConflictPoint out;
  const double speed_f = focal.speed();
  const double speed_o = other.speed();
  if (speed_f < config.speed_floor || speed_o < config.speed_floor) return out;

  Vec2 loc;
  double ttcp_f = 0.0, ttcp_o = 0.0;
  if (ray_intersection(focal, other, config.conflict_horizon, &loc, &ttcp_f, &ttcp_o)) {
    out.exists = true;
  } else {
    const double t_star = closest_approach_time(focal, other, config.conflict_horizon);
    const Vec2 pf = focal.position + focal.velocity * t_star;
    const Vec2 po = other.position + other.velocity * t_star;
    if ((po - pf).norm() > config.conflict_radius) return out;
    out.exists = true;
    loc = (pf + po) * 0.5;
    ttcp_f = (loc - focal.position).norm() / speed_f;
    ttcp_o = (loc - other.position).norm() / speed_o;
  }
  out.location = loc;
  out.distance = (loc - focal_pose.position).norm();
  out.relative_position = to_frame(loc, focal_pose);
  out.bearing = normalize_angle(
      std::atan2(loc.y - focal_pose.position.y, loc.x - focal_pose.position.x) - focal_pose.heading);
  out.ttcp_focal = ttcp_f;
  out.ttcp_other = ttcp_o;
  out.delta_ttcp = std::abs(ttcp_f - ttcp_o);
  return out;
}

InteractionFeatureSet select_interactions(const Scenario& scenario, const std::string& focal_id,
                                          const TimeConfig& time, const FeatureConfig& config) {
  const AgentTrack* focal_raw = scenario.find_agent(focal_id);
  if (focal_raw == nullptr) throw ContractError("select_interactions: unknown focal id " + focal_id);
  const AgentTrack focal = interpolate_history(*focal_raw, *focal_raw, time);
  const Pose pose = final_pose(focal, time);
  const int final_idx = time.t_hist - 1;

  InteractionFeatureSet out;
  struct Candidate {
    const AgentTrack* track;
    AgentTrack interpolated;
    double distance;
    GeometryType geometry;
  };
  std::vector<Candidate> candidates;
  for (const auto& other : scenario.agents) {
    if (other.agent_id == focal_id) continue;
    AgentTrack interp = interpolate_history(other, *focal_raw, time);
    if (!interp.states[final_idx].valid) continue;
    const double dist = (interp.states[final_idx].position - pose.position).norm();
    if (dist > config.interaction_radius) continue;
    if (interp.max_history_speed(time.t_hist) < config.stationary_floor) continue;
    const Pose other_pose{interp.states[final_idx].position, interp.states[final_idx].heading};
    candidates.push_back({&other, std::move(interp), dist, classify_geometry(pose, other_pose, config)});
  }
  out.density = static_cast<int>(candidates.size());

  for (const auto& cand : candidates) {
    const int leaf = geometry_leaf_index(cand.geometry);
    auto& slot = out.slots[leaf];
    if (slot && slot->distance <= cand.distance) continue;

    InteractionSlot s;
    s.agent_id = cand.track->agent_id;
    s.other_type = cand.track->agent_type;
    s.distance = cand.distance;

    const AgentTrack& other = cand.interpolated;
    // Overlapping valid steps; both spans are contiguous and include the final step.
    for (int t = 0; t < time.t_hist; ++t) {
      if (!focal.states[t].valid || !other.states[t].valid) continue;
      const Vec2 dp = other.states[t].position - focal.states[t].position;
      const Vec2 dv = other.states[t].velocity - focal.states[t].velocity;
      const Vec2 da = other.states[t].acceleration - focal.states[t].acceleration;
      if (s.rel_final.px.empty()) s.rel_final.span_start = t;
      const Vec2 dpf = rotate(dp, -pose.heading);
      const Vec2 dvf = rotate(dv, -pose.heading);
      const Vec2 daf = rotate(da, -pose.heading);
      s.rel_final.px.push_back(dpf.x);
      s.rel_final.py.push_back(dpf.y);
      s.rel_final.vx.push_back(dvf.x);
      s.rel_final.vy.push_back(dvf.y);
      s.rel_final.ax.push_back(daf.x);
      s.rel_final.ay.push_back(daf.y);
      const Vec2 dpp = rotate(dp, -focal.states[t].heading);
      const Vec2 dvp = rotate(dv, -focal.states[t].heading);
      s.per_pose_px.push_back(dpp.x);
      s.per_pose_py.push_back(dpp.y);
      s.per_pose_vx.push_back(dvp.x);
      s.per_pose_vy.push_back(dvp.y);
      const ConflictPoint step_conflict =
          project_conflict_point(focal.states[t], other.states[t], pose, config);
      if (step_conflict.exists) s.delta_ttcp_series.push_back(step_conflict.delta_ttcp);
    }
    s.closing_speed = closing_speed(focal, other, time);
    s.conflict = project_conflict_point(focal.states[final_idx], other.states[final_idx], pose, config);
    slot = std::move(s);
  }
  return out;
}

}  // namespace ctxbench
