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

#include "ctxbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"
#include "ctxbench/rng.hpp"

namespace ctxbench {

namespace {

// Piecewise-linear speed profile: constant v0 until brake_start, then linear
// deceleration at rate `decel` down to zero. decel == 0 means never brake.
struct SpeedProfile {
  double v0 = 0.0;
  double brake_start = 1e18;
  double decel = 0.0;

  void at(double t, double* s, double* v, double* a) const {
    if (decel <= 0.0 || t <= brake_start) {
      *s = v0 * t;
      *v = v0;
      *a = 0.0;
      return;
    }
    const double tau = t - brake_start;
    const double t_stop = v0 / decel;
    if (tau < t_stop) {
      *s = v0 * brake_start + v0 * tau - 0.5 * decel * tau * tau;
      *v = v0 - decel * tau;
      *a = -decel;
    } else {
      *s = v0 * brake_start + 0.5 * v0 * v0 / decel;
      *v = 0.0;
      *a = 0.0;
    }
  }
};

AgentTrack make_line_track(const std::string& id, AgentType type, const Vec2& start,
                           double heading, const SpeedProfile& profile, const TimeConfig& time) {
  AgentTrack track;
  track.agent_id = id;
  track.agent_type = type;
  track.states.resize(time.total());
  const Vec2 u{std::cos(heading), std::sin(heading)};
  for (int k = 0; k < time.total(); ++k) {
    double s, v, a;
    profile.at(k * time.dt, &s, &v, &a);
    AgentState& st = track.states[k];
    st.position = start + u * s;
    st.velocity = u * v;
    st.acceleration = u * a;
    st.heading = normalize_angle(heading);
    st.valid = true;
  }
  return track;
}

// Constant angular-rate circular motion. omega > 0 turns left.
AgentTrack make_arc_track(const std::string& id, AgentType type, const Vec2& center,
                          double radius, double alpha0, double omega, const TimeConfig& time) {
  AgentTrack track;
  track.agent_id = id;
  track.agent_type = type;
  track.states.resize(time.total());
  for (int k = 0; k < time.total(); ++k) {
    const double alpha = alpha0 + omega * k * time.dt;
    AgentState& st = track.states[k];
    st.position = center + Vec2{radius * std::cos(alpha), radius * std::sin(alpha)};
    st.velocity = Vec2{-std::sin(alpha), std::cos(alpha)} * (radius * omega);
    st.acceleration = Vec2{std::cos(alpha), std::sin(alpha)} * (-radius * omega * omega);
    st.heading = normalize_angle(alpha + (omega >= 0.0 ? kPi / 2.0 : -kPi / 2.0));
    st.valid = true;
  }
  return track;
}

AgentTrack make_stationary_track(const std::string& id, AgentType type, const Vec2& pos,
                                 double heading, const TimeConfig& time) {
  AgentTrack track;
  track.agent_id = id;
  track.agent_type = type;
  track.states.resize(time.total());
  for (auto& st : track.states) {
    st.position = pos;
    st.heading = normalize_angle(heading);
    st.valid = true;
  }
  return track;
}

MapPolyline straight_lane(double x0, double x1, double y, double speed_limit) {
  MapPolyline lane;
  lane.kind = MapKind::kLane;
  lane.speed_limit = speed_limit;
  const double step = 2.0;
  for (double x = x0; x < x1; x += step) lane.points.push_back({x, y});
  lane.points.push_back({x1, y});
  return lane;
}

MapPolyline arc_lane(const Vec2& center, double radius, double a0, double a1, double speed_limit) {
  MapPolyline lane;
  lane.kind = MapKind::kLane;
  lane.speed_limit = speed_limit;
  const double step = 2.0 / radius;
  const int n = std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) / step)));
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * i / n;
    lane.points.push_back(center + Vec2{radius * std::cos(a), radius * std::sin(a)});
  }
  return lane;
}

MapPolyline cross_segment(MapKind kind, const Vec2& mid, double heading, double half_width) {
  MapPolyline poly;
  poly.kind = kind;
  const Vec2 n{-std::sin(heading), std::cos(heading)};
  poly.points.push_back(mid - n * half_width);
  poly.points.push_back(mid + n * half_width);
  return poly;
}

MapPolyline point_feature(MapKind kind, const Vec2& at) {
  MapPolyline poly;
  poly.kind = kind;
  poly.points.push_back(at);
  return poly;
}

void apply_rigid_transform(Scenario* s, double rot, const Vec2& shift) {
  for (auto& track : s->agents) {
    for (auto& st : track.states) {
      if (!st.valid) continue;
      st.position = rotate(st.position, rot) + shift;
      st.velocity = rotate(st.velocity, rot);
      st.acceleration = rotate(st.acceleration, rot);
      st.heading = normalize_angle(st.heading + rot);
    }
  }
  for (auto& poly : s->map) {
    for (auto& p : poly.points) p = rotate(p, rot) + shift;
  }
}

// Drops a random prefix and sometimes one interior history step of a partner
// track, so downstream interpolation has real gaps to fill.
void mask_partner_history(AgentTrack* track, const TimeConfig& time, Rng& rng) {
  if (rng.uniform() < 0.3) {
    const int prefix = static_cast<int>(rng.uniform_int(1, std::min(5, time.t_hist - 3)));
    for (int t = 0; t < prefix; ++t) track->states[t] = AgentState{};
  }
  if (rng.uniform() < 0.2 && time.t_hist >= 5) {
    const int mid = static_cast<int>(rng.uniform_int(2, time.t_hist - 3));
    if (track->states[mid].valid) track->states[mid] = AgentState{};
  }
}

struct Builder {
  Scenario s;
  const TimeConfig& time;
  Rng& rng;
  double t_now;  // time of the final history step
  int next_partner = 1;

  Builder(const TimeConfig& t, Rng& r) : time(t), rng(r), t_now((t.t_hist - 1) * t.dt) {}

  std::string partner_id() { return "a" + std::to_string(next_partner++); }

  // Straight partner placed relative to the focal final pose (local frame):
  // at t_now it sits at (lon, lat) moving with `heading` and `speed`.
  AgentTrack relative_line_partner(AgentType type, double lon, double lat, double heading,
                                   double speed, bool mask = true) {
    const Vec2 u{std::cos(heading), std::sin(heading)};
    const Vec2 at_now{lon, lat};
    SpeedProfile prof{speed};
    AgentTrack track = make_line_track(partner_id(), type, at_now - u * (speed * t_now),
                                       heading, prof, time);
    if (mask) mask_partner_history(&track, time, rng);
    return track;
  }
};

void gen_cruise(Builder& b) {
  const double v = b.rng.uniform(8.0, 15.0);
  SpeedProfile prof{v};
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, {-v * b.t_now, 0.0}, 0.0, prof, b.time));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(straight_lane(-v * b.t_now - 10.0, v * horizon + 15.0, 0.0, v * b.rng.uniform(1.0, 1.3)));
  if (b.rng.uniform() < 0.5) {
    b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(20.0, 40.0),
                                                 b.rng.uniform(-0.8, 0.8), 0.0, v));
  }
}

void gen_turn(Builder& b) {
  const double radius = b.rng.uniform(8.0, 25.0);
  const double v = b.rng.uniform(5.0, 10.0);
  const bool left = b.rng.uniform() < 0.5;
  const double omega = (left ? 1.0 : -1.0) * v / radius;
  const Vec2 center{0.0, left ? radius : -radius};
  const double alpha_now = left ? -kPi / 2.0 : kPi / 2.0;
  const double alpha0 = alpha_now - omega * b.t_now;
  b.s.agents.push_back(make_arc_track("ego", AgentType::kVehicle, center, radius, alpha0, omega, b.time));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(arc_lane(center, radius, alpha0 - 0.3 * (left ? 1 : -1),
                             alpha0 + omega * horizon + 0.3 * (left ? 1 : -1), v * 1.2));
  b.s.meta["planted_radius"] = format_double(radius);
}

void gen_stop_sign(Builder& b) {
  const double v = b.rng.uniform(6.0, 12.0);
  SpeedProfile prof{v, b.rng.uniform(0.3, 1.0), 0.0};
  // Stop 1.5..4 s after the brake begins.
  prof.decel = v / b.rng.uniform(1.5, 4.0);
  double s_stop, unused_v, unused_a;
  prof.at(1e6, &s_stop, &unused_v, &unused_a);
  const Vec2 start{-v * b.t_now, 0.0};
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, start, 0.0, prof, b.time));
  const double stop_x = start.x + s_stop;
  b.s.map.push_back(straight_lane(start.x - 10.0, stop_x + 30.0, 0.0, v * 1.15));
  b.s.map.push_back(point_feature(MapKind::kStopSign, {stop_x + 1.0, -3.0}));
  b.s.map.push_back(cross_segment(MapKind::kCrosswalk, {stop_x + 4.0, 0.0}, 0.0, 5.0));
}

void gen_crossing(Builder& b) {
  const double v_f = b.rng.uniform(7.0, 13.0);
  const double tau_f = b.rng.uniform(1.5, 4.0);
  const double x_c = v_f * tau_f;
  const bool from_left = b.rng.uniform() < 0.5;
  const double v_o = b.rng.uniform(6.0, 12.0);
  double delta = b.rng.uniform(0.5, 1.5) * (b.rng.uniform() < 0.5 ? -1.0 : 1.0);
  double tau_o = tau_f + delta;
  if (tau_o < 0.8) {
    tau_o = tau_f + std::abs(delta);
    delta = std::abs(delta);
  }
  const double d_o = v_o * tau_o;

  SpeedProfile focal_prof{v_f};
  if (b.rng.uniform() < 0.4) {
    focal_prof.brake_start = b.t_now + b.rng.uniform(0.2, 1.0);
    focal_prof.decel = b.rng.uniform(1.0, 3.0);
  }
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, {-v_f * b.t_now, 0.0}, 0.0,
                                       focal_prof, b.time));
  const double other_heading = from_left ? -kPi / 2.0 : kPi / 2.0;
  AgentTrack other = b.relative_line_partner(AgentType::kVehicle, x_c,
                                             from_left ? d_o : -d_o, other_heading, v_o);
  b.s.meta["partner_id"] = other.agent_id;
  b.s.meta["planted_geometry"] = from_left ? "crossing_left" : "crossing_right";
  b.s.meta["planted_dttcp"] = format_double(std::abs(tau_f - tau_o));
  b.s.agents.push_back(std::move(other));
  b.s.map.push_back(straight_lane(-v_f * b.t_now - 10.0, x_c + 40.0, 0.0, v_f * 1.2));
  b.s.map.push_back(point_feature(MapKind::kTrafficLight, {x_c - 2.0, from_left ? 4.0 : -4.0}));
}

void gen_lead_trail(Builder& b) {
  const double v = b.rng.uniform(8.0, 14.0);
  SpeedProfile prof{v, b.t_now + b.rng.uniform(0.5, 2.0), b.rng.uniform(0.5, 1.5)};
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, {-v * b.t_now, 0.0}, 0.0, prof, b.time));
  AgentTrack leader = b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(15.0, 35.0),
                                              b.rng.uniform(-1.0, 1.0), 0.0, v * b.rng.uniform(0.6, 0.9));
  AgentTrack trailer = b.relative_line_partner(AgentType::kVehicle, -b.rng.uniform(10.0, 25.0),
                                               b.rng.uniform(-1.0, 1.0), 0.0, v * b.rng.uniform(1.05, 1.3));
  b.s.meta["partner_id"] = leader.agent_id;
  b.s.meta["planted_geometry"] = "collinear_leading";
  b.s.agents.push_back(std::move(leader));
  b.s.agents.push_back(std::move(trailer));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(straight_lane(-v * b.t_now - 30.0, v * horizon + 40.0, 0.0, v * 1.2));
}

void gen_head_on(Builder& b) {
  const double v = b.rng.uniform(8.0, 13.0);
  SpeedProfile prof{v};
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, {-v * b.t_now, 0.0}, 0.0, prof, b.time));
  AgentTrack oncoming = b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(25.0, 45.0),
                                                b.rng.uniform(-1.5, 1.5), kPi, b.rng.uniform(6.0, 12.0));
  b.s.meta["partner_id"] = oncoming.agent_id;
  b.s.meta["planted_geometry"] = "collinear_head_on";
  b.s.agents.push_back(std::move(oncoming));
  const bool passer_left = b.rng.uniform() < 0.5;
  b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(10.0, 30.0),
                                               (passer_left ? 1.0 : -1.0) * b.rng.uniform(4.0, 8.0),
                                               kPi, b.rng.uniform(6.0, 12.0)));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(straight_lane(-v * b.t_now - 10.0, v * horizon + 50.0, 0.0, v * 1.25));
}

void gen_dense(Builder& b) {
  const double v = b.rng.uniform(3.0, 7.0);
  SpeedProfile prof{v, b.t_now + b.rng.uniform(0.3, 1.5), b.rng.uniform(1.0, 2.5)};
  b.s.agents.push_back(make_line_track("ego", AgentType::kVehicle, {-v * b.t_now, 0.0}, 0.0, prof, b.time));
  b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(8.0, 15.0),
                                               b.rng.uniform(-0.8, 0.8), 0.0, v * 0.9));
  b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, -b.rng.uniform(8.0, 15.0),
                                               b.rng.uniform(-0.8, 0.8), 0.0, v * 1.1));
  b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(-5.0, 10.0),
                                               b.rng.uniform(4.0, 6.0), 0.0, v * b.rng.uniform(0.8, 1.2)));
  b.s.agents.push_back(b.relative_line_partner(AgentType::kCyclist, b.rng.uniform(-5.0, 10.0),
                                               -b.rng.uniform(4.0, 6.0), 0.0, v * b.rng.uniform(0.6, 1.0)));
  // Parked cars: stationary, filtered out of interactions but present in the scene.
  b.s.agents.push_back(make_stationary_track(b.partner_id(), AgentType::kVehicle,
                                             {b.rng.uniform(5.0, 20.0), 8.0}, 0.0, b.time));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(straight_lane(-v * b.t_now - 30.0, v * horizon + 30.0, 0.0, 8.0));
  b.s.map.push_back(cross_segment(MapKind::kSpeedBump, {b.rng.uniform(10.0, 20.0), 0.0}, 0.0, 4.0));
}

void gen_sparse(Builder& b) {
  const double radius = b.rng.uniform(40.0, 80.0);
  const double v = b.rng.uniform(7.0, 13.0);
  const bool left = b.rng.uniform() < 0.5;
  const double omega = (left ? 1.0 : -1.0) * v / radius;
  const Vec2 center{0.0, left ? radius : -radius};
  const double alpha_now = left ? -kPi / 2.0 : kPi / 2.0;
  const double alpha0 = alpha_now - omega * b.t_now;
  b.s.agents.push_back(make_arc_track("ego", AgentType::kVehicle, center, radius, alpha0, omega, b.time));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(arc_lane(center, radius, alpha0 - 0.1 * (left ? 1 : -1),
                             alpha0 + omega * horizon + 0.1 * (left ? 1 : -1), v * 1.3));
}

void gen_ped_cross(Builder& b) {
  const double v_p = b.rng.uniform(0.9, 1.7);
  const double x_p = b.rng.uniform(3.0, 8.0);
  SpeedProfile prof{v_p};
  // Pedestrian walks north across the road, starting south of it.
  b.s.agents.push_back(make_line_track("ego", AgentType::kPedestrian, {x_p, -6.0}, kPi / 2.0,
                                       prof, b.time));
  const double v_car = b.rng.uniform(5.0, 10.0);
  AgentTrack car = make_line_track(b.partner_id(), AgentType::kVehicle,
                                   {-b.rng.uniform(12.0, 30.0), 0.0}, 0.0,
                                   SpeedProfile{v_car}, b.time);
  mask_partner_history(&car, b.time, b.rng);
  b.s.meta["partner_id"] = car.agent_id;
  b.s.agents.push_back(std::move(car));
  b.s.map.push_back(straight_lane(-40.0, 40.0, 0.0, 8.0));
  MapPolyline cw;
  cw.kind = MapKind::kCrosswalk;
  cw.points.push_back({x_p, -5.0});
  cw.points.push_back({x_p, 5.0});
  b.s.map.push_back(std::move(cw));
}

void gen_cyclist_lane(Builder& b) {
  const double v = b.rng.uniform(4.0, 7.0);
  SpeedProfile prof{v};
  b.s.agents.push_back(make_line_track("ego", AgentType::kCyclist, {-v * b.t_now, 0.0}, 0.0, prof, b.time));
  b.s.agents.push_back(b.relative_line_partner(AgentType::kVehicle, b.rng.uniform(-10.0, 5.0),
                                               b.rng.uniform(3.6, 5.0), 0.0, v * b.rng.uniform(1.8, 2.5)));
  const double horizon = b.time.total() * b.time.dt;
  b.s.map.push_back(straight_lane(-v * b.t_now - 15.0, v * horizon * 2.5 + 20.0, 0.0, 14.0));
}

using GenFn = void (*)(Builder&);

struct ArchetypeSpec {
  const char* name;
  GenFn fn;
};

const ArchetypeSpec kArchetypes[] = {
    {"cruise", gen_cruise},       {"turn", gen_turn},
    {"stop_sign", gen_stop_sign}, {"crossing", gen_crossing},
    {"lead_trail", gen_lead_trail}, {"head_on", gen_head_on},
    {"dense", gen_dense},         {"sparse", gen_sparse},
    {"ped_cross", gen_ped_cross}, {"cyclist_lane", gen_cyclist_lane},
};

}  // namespace

const std::vector<std::string>& archetype_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& a : kArchetypes) v.push_back(a.name);
    return v;
  }();
  return names;
}

int SynthConfig::total_count() const {
  int total = 0;
  for (const auto& [name, count] : counts) total += count;
  return total;
}

std::vector<Scenario> synthesize_corpus(const SynthConfig& config, uint64_t seed) {
  if (config.total_count() <= 0) {
    throw ValidationError("synthesize_corpus: zero total scenario count");
  }
  for (const auto& [name, count] : config.counts) {
    if (count < 0) throw ValidationError("synthesize_corpus: negative count for " + name);
    const auto& names = archetype_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ValidationError("synthesize_corpus: unknown archetype '" + name + "'");
    }
  }

  const uint64_t base = Rng::substream(seed, "synth");
  std::vector<Scenario> corpus;
  int global_index = 0;
  for (const auto& arche : kArchetypes) {
    int count = 0;
    for (const auto& [name, c] : config.counts) {
      if (name == arche.name) count += c;
    }
    for (int i = 0; i < count; ++i, ++global_index) {
      Rng rng(Rng::splitmix(base ^ ((static_cast<uint64_t>(global_index) + 1) * 0x9e3779b97f4a7c15ull)));
      Builder b(config.time, rng);
      char sid[32];
      std::snprintf(sid, sizeof(sid), "s%05d", global_index);
      b.s.scenario_id = sid;
      b.s.meta["archetype"] = arche.name;
      arche.fn(b);
      b.s.focal_ids = {"ego"};
      const double rot = rng.uniform(-kPi, kPi);
      const Vec2 shift{rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)};
      apply_rigid_transform(&b.s, rot, shift);
      corpus.push_back(std::move(b.s));
    }
  }
  return corpus;
}

}  // namespace ctxbench
