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

#include "ctxbench/ego_features.hpp"

#include <algorithm>
#include <cmath>

#include "ctxbench/errors.hpp"

namespace ctxbench {

FrenetPoint frenet_project(const Vec2& point, const MapPolyline& lane) {
  if (lane.points.size() < 2) throw ContractError("frenet_project: polyline needs >= 2 points");
  FrenetPoint best;
  double best_dist = std::numeric_limits<double>::infinity();
  double cum_len = 0.0;
  for (size_t i = 0; i + 1 < lane.points.size(); ++i) {
    const Vec2& a = lane.points[i];
    const Vec2& b = lane.points[i + 1];
    const double seg_len = (b - a).norm();
    const SegmentProjection proj = project_on_segment(point, a, b);
    if (proj.distance < best_dist) {
      best_dist = proj.distance;
      const Vec2 u = seg_len > 0.0 ? (b - a) / seg_len : Vec2{1.0, 0.0};
      best.s = cum_len + proj.t * seg_len;
      best.d = u.cross(point - a);
      best.segment = i;
      best.heading = std::atan2(b.y - a.y, b.x - a.x);
    }
    cum_len += seg_len;
  }
  return best;
}

Vec2 frenet_to_world(const FrenetPoint& f, const MapPolyline& lane) {
  if (lane.points.size() < 2) throw ContractError("frenet_to_world: polyline needs >= 2 points");
  double remaining = f.s;
  for (size_t i = 0; i + 1 < lane.points.size(); ++i) {
    const Vec2& a = lane.points[i];
    const Vec2& b = lane.points[i + 1];
    const double seg_len = (b - a).norm();
    if (remaining <= seg_len || i + 2 == lane.points.size()) {
      const Vec2 u = seg_len > 0.0 ? (b - a) / seg_len : Vec2{1.0, 0.0};
      const Vec2 n{-u.y, u.x};
      return a + u * remaining + n * f.d;
    }
    remaining -= seg_len;
  }
  return lane.points.back();
}

RelativeKinematics relative_kinematics(const AgentTrack& track, const Pose& pose,
                                       const TimeConfig& time, const FeatureConfig& config) {
  RelativeKinematics out;
  const auto [lo, hi] = track.history_valid_bounds(time.t_hist);
  if (lo < 0) return out;
  out.span_start = lo;
  for (int t = lo; t <= hi; ++t) {
    const AgentState& st = track.states[t];
    const Vec2 p = to_frame(st.position, pose);
    const Vec2 v = rotate_into(st.velocity, pose);
    const Vec2 a = rotate_into(st.acceleration, pose);
    out.px.push_back(p.x);
    out.py.push_back(p.y);
    out.vx.push_back(v.x);
    out.vy.push_back(v.y);
    out.ax.push_back(a.x);
    out.ay.push_back(a.y);
    const double speed = st.speed();
    double kappa = 0.0;
    if (speed >= config.speed_floor) {
      kappa = st.velocity.cross(st.acceleration) / (speed * speed * speed);
    }
    out.curvature.push_back(kappa);
  }
  return out;
}

std::optional<LaneAssignment> assign_lane(const AgentTrack& track,
                                          const std::vector<MapPolyline>& map,
                                          const TimeConfig& time, const FeatureConfig& config) {
  const Pose pose = final_pose(track, time);

  int best_idx = -1;
  FrenetPoint best_proj;
  double best_abs_d = 0.0;
  double best_heading_diff = 0.0;
  for (size_t i = 0; i < map.size(); ++i) {
    if (map[i].kind != MapKind::kLane) continue;
    const FrenetPoint proj = frenet_project(pose.position, map[i]);
    const double heading_diff = std::abs(normalize_angle(pose.heading - proj.heading));
    const double abs_d = std::abs(proj.d);
    if (heading_diff > config.heading_thresh || abs_d > config.lane_lateral_thresh) continue;
    const bool better = best_idx < 0 || abs_d < best_abs_d ||
                        (abs_d == best_abs_d && heading_diff < best_heading_diff);
    if (better) {
      best_idx = static_cast<int>(i);
      best_proj = proj;
      best_abs_d = abs_d;
      best_heading_diff = heading_diff;
    }
  }
  if (best_idx < 0) return std::nullopt;

  LaneAssignment lane;
  lane.lane_ref = best_idx;
  lane.heading_diff = best_heading_diff;
  lane.lateral_offset = best_proj.d;
  const MapPolyline& poly = map[best_idx];
  const auto [lo, hi] = track.history_valid_bounds(time.t_hist);
  for (int t = lo; t <= hi; ++t) {
    const AgentState& st = track.states[t];
    const FrenetPoint f = frenet_project(st.position, poly);
    lane.frenet_s.push_back(f.s);
    lane.frenet_d.push_back(f.d);
    if (poly.speed_limit && *poly.speed_limit > 0.0) {
      lane.compliance.push_back((st.speed() - *poly.speed_limit) / *poly.speed_limit);
    } else {
      lane.compliance.push_back(0.0);
    }
  }
  return lane;
}

TcdProximityResult tcd_proximity(const Pose& pose, const std::vector<MapPolyline>& map) {
  TcdProximityResult out;
  for (int k = 0; k < kNumTcdKinds; ++k) {
    const MapKind kind = kTcdKinds[k];
    double best_dist = std::numeric_limits<double>::infinity();
    double best_fwd_dist = std::numeric_limits<double>::infinity();
    Vec2 best_point, best_fwd_point;
    for (const auto& poly : map) {
      if (poly.kind != kind || poly.points.empty()) continue;
      const SegmentProjection proj = project_on_polyline(pose.position, poly.points);
      if (proj.distance < best_dist) {
        best_dist = proj.distance;
        best_point = proj.point;
      }
      if (to_frame(proj.point, pose).x > 0.0 && proj.distance < best_fwd_dist) {
        best_fwd_dist = proj.distance;
        best_fwd_point = proj.point;
      }
    }
    auto make = [&](double dist, const Vec2& point) {
      TcdProximity prox;
      prox.kind = kind;
      prox.distance = dist;
      prox.relative_heading =
          normalize_angle(std::atan2(point.y - pose.position.y, point.x - pose.position.x) - pose.heading);
      prox.is_forward = to_frame(point, pose).x > 0.0;
      return prox;
    };
    if (std::isfinite(best_dist)) out.closest[k] = make(best_dist, best_point);
    if (std::isfinite(best_fwd_dist)) out.forward[k] = make(best_fwd_dist, best_fwd_point);
  }
  return out;
}

EgoFeatureSet extract_ego_features(const AgentTrack& interpolated_track,
                                   const std::vector<MapPolyline>& map, const TimeConfig& time,
                                   const FeatureConfig& config) {
  EgoFeatureSet out;
  const Pose pose = final_pose(interpolated_track, time);
  out.kinematics = relative_kinematics(interpolated_track, pose, time, config);
  out.lane = assign_lane(interpolated_track, map, time, config);
  TcdProximityResult tcd = tcd_proximity(pose, map);
  out.tcd_closest = tcd.closest;
  out.tcd_forward = tcd.forward;
  return out;
}

}  // namespace ctxbench
