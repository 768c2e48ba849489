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

#include "ctxbench/rng.hpp"
#include "ctxbench/social_features.hpp"
#include "ctxbench/synth.hpp"

using namespace ctxbench;

namespace {

const TimeConfig kTime{11, 2, 0.1};
const FeatureConfig kFeatures{};

// Independent truth table over (heading difference, lateral, longitudinal),
// written directly from the classification rule statement.
GeometryType oracle_classify(double dth, double lat, double lon) {
  dth = normalize_angle(dth);
  const double deg30 = kPi / 6.0;
  if (std::abs(dth) <= deg30) {
    if (std::abs(lat) <= 3.25) {
      return {GeometryBase::kCollinear,
              lon >= 0.0 ? GeometryVariant::kLeading : GeometryVariant::kTrailing};
    }
    return {GeometryBase::kParallel, lat > 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
  }
  if (kPi - std::abs(dth) <= deg30) {
    if (std::abs(lat) <= 3.25) return {GeometryBase::kCollinear, GeometryVariant::kHeadOn};
    return {GeometryBase::kOpposite, lat > 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
  }
  return {GeometryBase::kCrossing, lat >= 0.0 ? GeometryVariant::kLeft : GeometryVariant::kRight};
}

AgentState state_at(const Vec2& pos, const Vec2& vel) {
  AgentState st;
  st.position = pos;
  st.velocity = vel;
  st.heading = vel.norm() > 1e-9 ? std::atan2(vel.y, vel.x) : 0.0;
  st.valid = true;
  return st;
}

AgentTrack constant_velocity_track(const std::string& id, const Vec2& pos_at_final,
                                   const Vec2& vel, int t_hist = 11, int t_fut = 2) {
  AgentTrack track;
  track.agent_id = id;
  track.states.resize(t_hist + t_fut);
  for (int t = 0; t < t_hist + t_fut; ++t) {
    const double dt = (t - (t_hist - 1)) * 0.1;
    track.states[t] = state_at(pos_at_final + vel * dt, vel);
  }
  return track;
}

}  // namespace

TEST_CASE("classify_geometry trivial cases") {
  const FeatureConfig cfg{};
  const Pose focal{{0, 0}, 0.0};
  CHECK(classify_geometry(focal, {{10, 0}, 0.0}, cfg) ==
        GeometryType{GeometryBase::kCollinear, GeometryVariant::kLeading});
  CHECK(classify_geometry(focal, {{20, 0}, kPi}, cfg) ==
        GeometryType{GeometryBase::kCollinear, GeometryVariant::kHeadOn});
  CHECK(classify_geometry(focal, {{5, -4}, kPi / 2.0}, cfg) ==
        GeometryType{GeometryBase::kCrossing, GeometryVariant::kRight});
}

TEST_CASE("classify_geometry agrees with the enumeration oracle on a boundary grid") {
  const FeatureConfig cfg{};
  const double deg = kPi / 180.0;
  const std::vector<double> dths = {-179.0 * deg, -150.0 * deg, -149.9 * deg, -90.0 * deg,
                                    -30.1 * deg,  -30.0 * deg,  -29.9 * deg,  0.0,
                                    29.9 * deg,   30.0 * deg,   30.1 * deg,   90.0 * deg,
                                    149.9 * deg,  150.0 * deg,  150.1 * deg,  kPi};
  const std::vector<double> lats = {-10.0, -3.26, -3.25, -3.24, -1.0, 0.0, 1.0, 3.24, 3.25, 3.26, 10.0};
  const std::vector<double> lons = {-20.0, -1.0, 0.0, 1.0, 20.0};
  int checked = 0;
  for (const double dth : dths) {
    for (const double lat : lats) {
      for (const double lon : lons) {
        // Identity focal pose keeps the boundary values exact in doubles.
        const Pose focal{{0.0, 0.0}, 0.0};
        const Pose other{{lon, lat}, normalize_angle(dth)};
        const GeometryType got = classify_geometry(focal, other, cfg);
        const GeometryType want = oracle_classify(dth, lat, lon);
        REQUIRE(got == want);
        ++checked;
      }
    }
  }
  CHECK(checked == static_cast<int>(dths.size() * lats.size() * lons.size()));
}

TEST_CASE("classification is total on random poses") {
  Rng rng(17);
  const FeatureConfig cfg{};
  for (int i = 0; i < 2000; ++i) {
    const double dth = rng.uniform(-kPi, kPi);
    const double lat = rng.uniform(-30, 30);
    const double lon = rng.uniform(-30, 30);
    const Pose focal{{rng.uniform(-10, 10), rng.uniform(-10, 10)}, rng.uniform(-kPi, kPi)};
    const Pose other{from_frame({lon, lat}, focal), normalize_angle(focal.heading + dth)};
    CHECK(classify_geometry(focal, other, cfg) == oracle_classify(dth, lat, lon));
  }
}

TEST_CASE("closing speed of a head-on pair is the sum of speeds") {
  AgentTrack focal = constant_velocity_track("f", {0, 0}, {5, 0});
  AgentTrack other = constant_velocity_track("o", {30, 0}, {-5, 0});
  const std::vector<double> cs = closing_speed(focal, other, kTime);
  REQUIRE(cs.size() == 11);
  for (const double v : cs) CHECK(v == doctest::Approx(10.0));
}

TEST_CASE("closing speed vanishes for identical velocities") {
  AgentTrack focal = constant_velocity_track("f", {0, 0}, {5, 0});
  AgentTrack other = constant_velocity_track("o", {10, 3}, {5, 0});
  for (const double v : closing_speed(focal, other, kTime)) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("closing speed matches a finite-difference oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    AgentTrack focal = constant_velocity_track(
        "f", {rng.uniform(-20, 20), rng.uniform(-20, 20)},
        {rng.uniform(-8, 8), rng.uniform(-8, 8)});
    AgentTrack other = constant_velocity_track(
        "o", {rng.uniform(-20, 20), rng.uniform(-20, 20)},
        {rng.uniform(-8, 8), rng.uniform(-8, 8)});
    const std::vector<double> cs = closing_speed(focal, other, kTime);
    // Central finite differences of the distance series (h = 1e-6 s).
    for (int t = 0; t < 11; ++t) {
      const double h = 1e-6;
      auto dist_at = [&](double dt) {
        const Vec2 pf = focal.states[t].position + focal.states[t].velocity * dt;
        const Vec2 po = other.states[t].position + other.states[t].velocity * dt;
        return (po - pf).norm();
      };
      const double fd = -(dist_at(h) - dist_at(-h)) / (2.0 * h);
      CHECK(cs[t] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("closing speed is symmetric under swapping the agents") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    AgentTrack a = constant_velocity_track("a", {rng.uniform(-20, 20), rng.uniform(-20, 20)},
                                           {rng.uniform(-8, 8), rng.uniform(-8, 8)});
    AgentTrack b = constant_velocity_track("b", {rng.uniform(-20, 20), rng.uniform(-20, 20)},
                                           {rng.uniform(-8, 8), rng.uniform(-8, 8)});
    const auto ab = closing_speed(a, b, kTime);
    const auto ba = closing_speed(b, a, kTime);
    for (size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == doctest::Approx(ba[i]).epsilon(1e-12));
  }
}

TEST_CASE("planted perpendicular conflict yields TTCPs of 2 s and 4 s") {
  const AgentState focal = state_at({-10, 0}, {5, 0});
  const AgentState other = state_at({0, -20}, {0, 5});
  const Pose pose{focal.position, 0.0};
  const ConflictPoint cp = project_conflict_point(focal, other, pose, kFeatures);
  REQUIRE(cp.exists);
  CHECK(cp.location.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp.location.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cp.ttcp_focal == doctest::Approx(2.0));
  CHECK(cp.ttcp_other == doctest::Approx(4.0));
  CHECK(cp.delta_ttcp == doctest::Approx(2.0));
}

TEST_CASE("parallel same-velocity agents have no conflict") {
  const AgentState focal = state_at({0, 0}, {5, 0});
  const AgentState other = state_at({0, 10}, {5, 0});
  const Pose pose{focal.position, 0.0};
  const ConflictPoint cp = project_conflict_point(focal, other, pose, kFeatures);
  CHECK_FALSE(cp.exists);
  CHECK(cp.delta_ttcp == 0.0);
  CHECK(cp.location.x == 0.0);
}

TEST_CASE("closed-form closest approach matches 1 ms grid search") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const AgentState a = state_at({rng.uniform(-40, 40), rng.uniform(-40, 40)},
                                  {rng.uniform(-10, 10), rng.uniform(-10, 10)});
    const AgentState b = state_at({rng.uniform(-40, 40), rng.uniform(-40, 40)},
                                  {rng.uniform(-10, 10), rng.uniform(-10, 10)});
    const double t_star = closest_approach_time(a, b, 10.0);
    double best_t = 0.0, best_d = 1e18;
    for (int ms = 0; ms <= 10000; ++ms) {
      const double t = ms * 1e-3;
      const double d = ((b.position - a.position) + (b.velocity - a.velocity) * t).norm();
      if (d < best_d) {
        best_d = d;
        best_t = t;
      }
    }
    CHECK(std::abs(t_star - best_t) <= 1e-3 + 1e-12);
  }
}

TEST_CASE("conflict location is invariant under swapping the agents") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const AgentState a = state_at({rng.uniform(-30, 30), rng.uniform(-30, 30)},
                                  {rng.uniform(-9, 9), rng.uniform(-9, 9)});
    const AgentState b = state_at({rng.uniform(-30, 30), rng.uniform(-30, 30)},
                                  {rng.uniform(-9, 9), rng.uniform(-9, 9)});
    const Pose pose_a{a.position, a.heading};
    const Pose pose_b{b.position, b.heading};
    const ConflictPoint ab = project_conflict_point(a, b, pose_a, kFeatures);
    const ConflictPoint ba = project_conflict_point(b, a, pose_b, kFeatures);
    CHECK(ab.exists == ba.exists);
    if (ab.exists) {
      CHECK(ab.location.x == doctest::Approx(ba.location.x).epsilon(1e-9));
      CHECK(ab.location.y == doctest::Approx(ba.location.y).epsilon(1e-9));
      CHECK(ab.delta_ttcp == doctest::Approx(ba.delta_ttcp).epsilon(1e-9));
      CHECK(ab.delta_ttcp >= 0.0);
    }
  }
}

TEST_CASE("stationary or crawling agents yield no conflict point") {
  const AgentState focal = state_at({0, 0}, {0.05, 0});
  const AgentState other = state_at({10, 0}, {-5, 0});
  const ConflictPoint cp = project_conflict_point(focal, other, {{0, 0}, 0.0}, kFeatures);
  CHECK_FALSE(cp.exists);
}

namespace {

Scenario two_agent_scene(const AgentTrack& focal, std::vector<AgentTrack> others) {
  Scenario s;
  s.scenario_id = "t";
  s.agents.push_back(focal);
  for (auto& o : others) s.agents.push_back(std::move(o));
  s.focal_ids = {focal.agent_id};
  return s;
}

}  // namespace

TEST_CASE("a lone focal agent has zero density and empty slots") {
  const Scenario s = two_agent_scene(constant_velocity_track("ego", {0, 0}, {5, 0}), {});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  CHECK(fs.density == 0);
  for (const auto& slot : fs.slots) CHECK_FALSE(slot.has_value());
}

TEST_CASE("the nearer of two leading agents wins the slot (exhaustive oracle)") {
  AgentTrack focal = constant_velocity_track("ego", {0, 0}, {5, 0});
  AgentTrack near = constant_velocity_track("near", {10, 0}, {5, 0});
  AgentTrack far = constant_velocity_track("far", {20, 0}, {5, 0});
  const Scenario s = two_agent_scene(focal, {far, near});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  CHECK(fs.density == 2);
  REQUIRE(fs.slots[0].has_value());
  CHECK(fs.slots[0]->agent_id == "near");
  CHECK(fs.slots[0]->distance == doctest::Approx(10.0));
}

TEST_CASE("agents beyond 50 m are excluded") {
  AgentTrack focal = constant_velocity_track("ego", {0, 0}, {5, 0});
  AgentTrack distant = constant_velocity_track("far", {60, 0}, {5, 0});
  const Scenario s = two_agent_scene(focal, {distant});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  CHECK(fs.density == 0);
  CHECK_FALSE(fs.slots[0].has_value());
}

TEST_CASE("stationary agents are excluded from interactions") {
  AgentTrack focal = constant_velocity_track("ego", {0, 0}, {5, 0});
  AgentTrack parked = constant_velocity_track("parked", {15, 1}, {0, 0});
  for (auto& st : parked.states) st.heading = 0.0;
  const Scenario s = two_agent_scene(focal, {parked});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  CHECK(fs.density == 0);
}

TEST_CASE("select_interactions fills slot series over the overlap") {
  AgentTrack focal = constant_velocity_track("ego", {0, 0}, {5, 0});
  AgentTrack lead = constant_velocity_track("lead", {12, 0}, {4, 0});
  const Scenario s = two_agent_scene(focal, {lead});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  REQUIRE(fs.slots[0].has_value());
  const InteractionSlot& slot = *fs.slots[0];
  CHECK(slot.rel_final.size() == 11);
  CHECK(slot.per_pose_px.size() == 11);
  CHECK(slot.closing_speed.size() == 11);
  // Dead-ahead slower leader: approaching at exactly 1 m/s.
  CHECK(slot.closing_speed.back() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(slot.other_type == AgentType::kVehicle);
}

TEST_CASE("mTTCP equals the minimum of the per-step conflict series") {
  AgentTrack focal = constant_velocity_track("ego", {0, 0}, {5, 0});
  AgentTrack crosser = constant_velocity_track("x", {9, -18}, {0, 5});
  const Scenario s = two_agent_scene(focal, {crosser});
  const InteractionFeatureSet fs = select_interactions(s, "ego", kTime, kFeatures);
  const int leaf = geometry_leaf_index({GeometryBase::kCrossing, GeometryVariant::kRight});
  REQUIRE(fs.slots[leaf].has_value());
  const auto& series = fs.slots[leaf]->delta_ttcp_series;
  REQUIRE_FALSE(series.empty());
  double mttcp = series[0];
  for (const double v : series) mttcp = std::min(mttcp, v);
  // Independent recomputation from the raw states.
  double expected = 1e18;
  for (int t = 0; t < 11; ++t) {
    const ConflictPoint cp = project_conflict_point(focal.states[t], crosser.states[t],
                                                    {focal.states[10].position, 0.0}, kFeatures);
    if (cp.exists) expected = std::min(expected, cp.delta_ttcp);
  }
  CHECK(mttcp == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("planted synthetic crossings classify as crossing geometry") {
  SynthConfig config;
  config.time = {11, 20, 0.1};
  config.counts = {{"crossing", 20}};
  const auto corpus = synthesize_corpus(config, 5);
  for (const Scenario& s : corpus) {
    const std::string planted = s.meta.at("planted_geometry");
    const std::string partner = s.meta.at("partner_id");
    const AgentTrack* focal = s.find_agent("ego");
    const AgentTrack* other = s.find_agent(partner);
    REQUIRE(focal != nullptr);
    REQUIRE(other != nullptr);
    const Pose fp = final_pose(*focal, config.time);
    const Pose op = final_pose(*other, config.time);
    const GeometryType got = classify_geometry(fp, op, kFeatures);
    CHECK(geometry_leaf_name(geometry_leaf_index(got)) == planted);
  }
}
