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

#include "ctxbench/ego_features.hpp"
#include "ctxbench/rng.hpp"
#include "ctxbench/scenario.hpp"
#include "ctxbench/synth.hpp"

using namespace ctxbench;

namespace {

const TimeConfig kTime{11, 2, 0.1};
const FeatureConfig kFeatures{};

AgentTrack circle_track(double radius, double speed, int n_states) {
  AgentTrack track;
  track.states.resize(n_states);
  const double omega = speed / radius;
  for (int t = 0; t < n_states; ++t) {
    const double a = omega * t * 0.1;
    AgentState& st = track.states[t];
    st.position = {radius * std::cos(a), radius * std::sin(a)};
    st.velocity = {-radius * omega * std::sin(a), radius * omega * std::cos(a)};
    st.acceleration = {-radius * omega * omega * std::cos(a), -radius * omega * omega * std::sin(a)};
    st.heading = normalize_angle(a + kPi / 2.0);
    st.valid = true;
  }
  return track;
}

AgentTrack straight_track(const Vec2& start, double heading, double speed, int n_states) {
  AgentTrack track;
  track.states.resize(n_states);
  const Vec2 u{std::cos(heading), std::sin(heading)};
  for (int t = 0; t < n_states; ++t) {
    AgentState& st = track.states[t];
    st.position = start + u * (speed * t * 0.1);
    st.velocity = u * speed;
    st.heading = normalize_angle(heading);
    st.valid = true;
  }
  return track;
}

MapPolyline lane_along_x(double y, double x0 = -100.0, double x1 = 100.0) {
  MapPolyline lane;
  lane.kind = MapKind::kLane;
  lane.speed_limit = 10.0;
  for (double x = x0; x <= x1; x += 5.0) lane.points.push_back({x, y});
  return lane;
}

}  // namespace

TEST_CASE("relative kinematics places the final state at the origin") {
  AgentTrack track = straight_track({3.0, -2.0}, 0.7, 8.0, 13);
  const Pose pose = final_pose(track, kTime);
  const RelativeKinematics rk = relative_kinematics(track, pose, kTime, kFeatures);
  REQUIRE(rk.size() == 11);
  CHECK(rk.px.back() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rk.py.back() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("velocity rotates into the pose frame") {
  AgentTrack track;
  track.states.resize(13);
  for (int t = 0; t < 11; ++t) {
    track.states[t].valid = true;
    track.states[t].velocity = {0.0, 1.0};
    track.states[t].heading = kPi / 2.0;
  }
  const Pose pose{{0.0, 0.0}, kPi / 2.0};
  const RelativeKinematics rk = relative_kinematics(track, pose, kTime, kFeatures);
  CHECK(rk.vx.back() == doctest::Approx(1.0));
  CHECK(rk.vy.back() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("curvature of a 10 m circle is 0.1") {
  AgentTrack track = circle_track(10.0, 6.0, 13);
  const Pose pose = final_pose(track, kTime);
  const RelativeKinematics rk = relative_kinematics(track, pose, kTime, kFeatures);
  for (const double k : rk.curvature) {
    CHECK(k == doctest::Approx(0.1).epsilon(1e-3));
  }
}

TEST_CASE("curvature is zero on straight tracks and under the speed floor") {
  AgentTrack track = straight_track({0, 0}, 0.3, 9.0, 13);
  const Pose pose = final_pose(track, kTime);
  RelativeKinematics rk = relative_kinematics(track, pose, kTime, kFeatures);
  for (const double k : rk.curvature) CHECK(k == 0.0);

  // Crawling: curvature formula is floored to zero.
  AgentTrack slow = circle_track(10.0, 0.05, 13);
  const RelativeKinematics rk_slow = relative_kinematics(slow, final_pose(slow, kTime), kTime, kFeatures);
  for (const double k : rk_slow.curvature) CHECK(k == 0.0);
}

TEST_CASE("relative kinematics preserves pairwise distances") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    AgentTrack track = straight_track({rng.uniform(-50, 50), rng.uniform(-50, 50)},
                                      rng.uniform(-kPi, kPi), rng.uniform(1.0, 12.0), 13);
    const Pose pose = final_pose(track, kTime);
    const RelativeKinematics rk = relative_kinematics(track, pose, kTime, kFeatures);
    for (size_t i = 1; i < rk.size(); ++i) {
      const double world = (track.states[i].position - track.states[i - 1].position).norm();
      const double local =
          std::hypot(rk.px[i] - rk.px[i - 1], rk.py[i] - rk.py[i - 1]);
      CHECK(std::abs(world - local) < 1e-9);
    }
  }
}

TEST_CASE("assign_lane picks the on-centerline lane") {
  AgentTrack track = straight_track({-8.0, 0.0}, 0.0, 8.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(0.0)};
  const auto lane = assign_lane(track, map, kTime, kFeatures);
  REQUIRE(lane.has_value());
  CHECK(lane->lane_ref == 0);
  CHECK(std::abs(lane->lateral_offset) < 1e-9);
  CHECK(std::abs(lane->frenet_d.back()) < 1e-9);
}

TEST_CASE("assign_lane rejects a lane 7 m to the side") {
  AgentTrack track = straight_track({-8.0, 7.0}, 0.0, 8.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(0.0)};
  CHECK_FALSE(assign_lane(track, map, kTime, kFeatures).has_value());
}

TEST_CASE("assign_lane rejects a misaligned heading") {
  AgentTrack track = straight_track({-8.0, 1.0}, kPi / 4.0, 8.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(0.0)};
  CHECK_FALSE(assign_lane(track, map, kTime, kFeatures).has_value());
}

TEST_CASE("assign_lane prefers the laterally nearer of two parallel lanes") {
  // Brute-force oracle: project onto both candidates and compare.
  AgentTrack track = straight_track({-8.0, 1.0}, 0.0, 8.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(2.0 + 1.0), lane_along_x(1.0 - 1.0)};
  const Pose pose = final_pose(track, kTime);
  int expected = -1;
  double best = 1e18;
  for (size_t i = 0; i < map.size(); ++i) {
    const FrenetPoint f = frenet_project(pose.position, map[i]);
    if (std::abs(f.d) < best) {
      best = std::abs(f.d);
      expected = static_cast<int>(i);
    }
  }
  const auto lane = assign_lane(track, map, kTime, kFeatures);
  REQUIRE(lane.has_value());
  CHECK(lane->lane_ref == expected);
  CHECK(expected == 1);
}

TEST_CASE("lane ties break on heading difference, then on polyline index") {
  AgentTrack track = straight_track({-8.0, 0.0}, 0.0, 8.0, 13);
  // Equal |d| and equal heading: the lower polyline index wins.
  std::vector<MapPolyline> tie_map = {lane_along_x(1.0), lane_along_x(-1.0)};
  const auto lane = assign_lane(track, tie_map, kTime, kFeatures);
  REQUIRE(lane.has_value());
  CHECK(lane->lane_ref == 0);

  // Both lanes pass exactly under the agent (|d| = 0 for each); the first is
  // slanted, so the aligned lane must win on heading difference despite its
  // higher index.
  MapPolyline slanted;
  slanted.kind = MapKind::kLane;
  slanted.speed_limit = 10.0;
  slanted.points.push_back({-100.0, -5.0});
  slanted.points.push_back({100.0, 5.0});
  std::vector<MapPolyline> heading_map = {slanted, lane_along_x(0.0)};
  const auto picked = assign_lane(track, heading_map, kTime, kFeatures);
  REQUIRE(picked.has_value());
  CHECK(picked->lane_ref == 1);
}

TEST_CASE("returned lane assignments satisfy both thresholds post-hoc") {
  SynthConfig config;
  config.time = {11, 20, 0.1};
  for (const auto& name : archetype_names()) config.counts.push_back({name, 4});
  const auto corpus = synthesize_corpus(config, 71);
  int assigned = 0;
  for (const Scenario& s : corpus) {
    const AgentTrack* focal = s.find_agent(s.focal_ids[0]);
    const AgentTrack interp = interpolate_history(*focal, *focal, config.time);
    const auto lane = assign_lane(interp, s.map, config.time, kFeatures);
    if (!lane) continue;
    ++assigned;
    CHECK(lane->heading_diff <= kFeatures.heading_thresh);
    CHECK(std::abs(lane->lateral_offset) <= kFeatures.lane_lateral_thresh);
    // Re-derive both quantities from the raw geometry.
    const Pose pose = final_pose(interp, config.time);
    const FrenetPoint f = frenet_project(pose.position, s.map[lane->lane_ref]);
    CHECK(std::abs(f.d) == doctest::Approx(std::abs(lane->lateral_offset)).epsilon(1e-12));
  }
  CHECK(assigned > 20);  // most archetypes drive on a lane
}

TEST_CASE("frenet round-trip recovers interior points") {
  Rng rng(13);
  MapPolyline lane;
  lane.kind = MapKind::kLane;
  // A bending polyline.
  for (int i = 0; i <= 40; ++i) {
    const double x = i * 2.0;
    lane.points.push_back({x, 10.0 * std::sin(x / 20.0)});
  }
  int interior = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const double x = rng.uniform(5.0, 75.0);
    const Vec2 p{x, 10.0 * std::sin(x / 20.0) + rng.uniform(-1.5, 1.5)};
    const FrenetPoint f = frenet_project(p, lane);
    // The round-trip property holds for projections interior to a segment
    // (clamped vertex projections carry an along-segment residual).
    const SegmentProjection seg =
        project_on_segment(p, lane.points[f.segment], lane.points[f.segment + 1]);
    if (seg.t <= 1e-9 || seg.t >= 1.0 - 1e-9) continue;
    ++interior;
    const Vec2 back = frenet_to_world(f, lane);
    CHECK((back - p).norm() < 1e-6);
  }
  CHECK(interior > 300);
}

TEST_CASE("frenet projection clamps beyond the lane extent") {
  MapPolyline lane = lane_along_x(0.0, 0.0, 10.0);
  const FrenetPoint before = frenet_project({-5.0, 1.0}, lane);
  CHECK(before.s == doctest::Approx(0.0));
  const FrenetPoint after = frenet_project({15.0, 1.0}, lane);
  CHECK(after.s == doctest::Approx(10.0));
}

TEST_CASE("compliance series uses the lane speed limit") {
  AgentTrack track = straight_track({-8.0, 0.0}, 0.0, 12.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(0.0)};  // limit 10
  const auto lane = assign_lane(track, map, kTime, kFeatures);
  REQUIRE(lane.has_value());
  CHECK(lane->compliance.back() == doctest::Approx(0.2));
}

TEST_CASE("tcd_proximity finds a stop sign dead ahead") {
  const Pose pose{{0.0, 0.0}, 0.0};
  std::vector<MapPolyline> map;
  MapPolyline sign;
  sign.kind = MapKind::kStopSign;
  sign.points.push_back({5.0, 0.0});
  map.push_back(sign);
  const TcdProximityResult out = tcd_proximity(pose, map);
  const int idx = 1;  // stop_sign slot
  REQUIRE(out.closest[idx].has_value());
  CHECK(out.closest[idx]->distance == doctest::Approx(5.0));
  CHECK(out.closest[idx]->relative_heading == doctest::Approx(0.0));
  CHECK(out.closest[idx]->is_forward);
  REQUIRE(out.forward[idx].has_value());
  CHECK(out.forward[idx]->distance == doctest::Approx(5.0));
}

TEST_CASE("a device behind appears in closest but not forward") {
  const Pose pose{{0.0, 0.0}, 0.0};
  std::vector<MapPolyline> map;
  MapPolyline sign;
  sign.kind = MapKind::kStopSign;
  sign.points.push_back({-5.0, 0.0});
  map.push_back(sign);
  const TcdProximityResult out = tcd_proximity(pose, map);
  REQUIRE(out.closest[1].has_value());
  CHECK_FALSE(out.closest[1]->is_forward);
  CHECK_FALSE(out.forward[1].has_value());
}

TEST_CASE("closest crosswalk beats a farther one (exhaustive oracle)") {
  Rng rng(40);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose{{rng.uniform(-10, 10), rng.uniform(-10, 10)}, rng.uniform(-kPi, kPi)};
    std::vector<MapPolyline> map;
    double best = 1e18;
    for (int i = 0; i < 4; ++i) {
      MapPolyline cw;
      cw.kind = MapKind::kCrosswalk;
      const Vec2 a{rng.uniform(-40, 40), rng.uniform(-40, 40)};
      const Vec2 b = a + Vec2{rng.uniform(-8, 8), rng.uniform(-8, 8)};
      cw.points = {a, b};
      map.push_back(cw);
      best = std::min(best, project_on_polyline(pose.position, cw.points).distance);
    }
    const TcdProximityResult out = tcd_proximity(pose, map);
    REQUIRE(out.closest[0].has_value());
    CHECK(out.closest[0]->distance == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("extract_ego_features composes the groups") {
  AgentTrack track = straight_track({-8.0, 0.0}, 0.0, 8.0, 13);
  std::vector<MapPolyline> map = {lane_along_x(0.0)};
  MapPolyline light;
  light.kind = MapKind::kTrafficLight;
  light.points.push_back({20.0, 4.0});
  map.push_back(light);
  const EgoFeatureSet fs = extract_ego_features(track, map, kTime, kFeatures);
  CHECK(fs.kinematics.size() == 11);
  CHECK(fs.lane.has_value());
  CHECK(fs.tcd_closest[2].has_value());   // traffic light
  CHECK_FALSE(fs.tcd_closest[1].has_value());  // no stop sign
}
