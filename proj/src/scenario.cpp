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

#include "ctxbench/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctxbench/errors.hpp"

namespace ctxbench {

using nlohmann::json;

const char* agent_type_name(AgentType t) {
  switch (t) {
    case AgentType::kVehicle: return "vehicle";
    case AgentType::kPedestrian: return "pedestrian";
    case AgentType::kCyclist: return "cyclist";
  }
  return "vehicle";
}

AgentType agent_type_from_name(const std::string& name) {
  if (name == "vehicle") return AgentType::kVehicle;
  if (name == "pedestrian") return AgentType::kPedestrian;
  if (name == "cyclist") return AgentType::kCyclist;
  throw ParseError("unknown agent type: " + name);
}

const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::kLane: return "lane";
    case MapKind::kCrosswalk: return "crosswalk";
    case MapKind::kStopSign: return "stop_sign";
    case MapKind::kTrafficLight: return "traffic_light";
    case MapKind::kSpeedBump: return "speed_bump";
  }
  return "lane";
}

MapKind map_kind_from_name(const std::string& name) {
  if (name == "lane") return MapKind::kLane;
  if (name == "crosswalk") return MapKind::kCrosswalk;
  if (name == "stop_sign") return MapKind::kStopSign;
  if (name == "traffic_light") return MapKind::kTrafficLight;
  if (name == "speed_bump") return MapKind::kSpeedBump;
  throw ParseError("unknown map kind: " + name);
}

std::pair<int, int> AgentTrack::history_valid_bounds(int t_hist) const {
  int lo = -1, hi = -1;
  const int n = std::min<int>(t_hist, static_cast<int>(states.size()));
  for (int t = 0; t < n; ++t) {
    if (states[t].valid) {
      if (lo < 0) lo = t;
      hi = t;
    }
  }
  return {lo, hi};
}

double AgentTrack::max_history_speed(int t_hist) const {
  double best = 0.0;
  const int n = std::min<int>(t_hist, static_cast<int>(states.size()));
  for (int t = 0; t < n; ++t) {
    if (states[t].valid) best = std::max(best, states[t].speed());
  }
  return best;
}

double MapPolyline::segment_heading(size_t segment) const {
  if (points.size() < 2) throw ContractError("segment_heading on a degenerate polyline");
  segment = std::min(segment, points.size() - 2);
  const Vec2 d = points[segment + 1] - points[segment];
  return std::atan2(d.y, d.x);
}

const AgentTrack* Scenario::find_agent(const std::string& agent_id) const {
  for (const auto& a : agents) {
    if (a.agent_id == agent_id) return &a;
  }
  return nullptr;
}

namespace {

std::string where(int line, const std::string& field) {
  std::ostringstream os;
  os << "line " << line << ", field '" << field << "': ";
  return os.str();
}

double require_finite(const json& v, int line, const std::string& field) {
  if (!v.is_number()) throw ParseError(where(line, field) + "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(where(line, field) + "non-finite value");
  return d;
}

const json& require_key(const json& obj, const char* key, int line, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where(line, ctx + "." + key) + "missing");
  return *it;
}

AgentState parse_state(const json& arr, int line, const std::string& field) {
  if (!arr.is_array() || arr.size() != 8) {
    throw ParseError(where(line, field) + "state must be [x,y,vx,vy,ax,ay,heading,valid]");
  }
  AgentState s;
  s.position = {require_finite(arr[0], line, field + "[0]"), require_finite(arr[1], line, field + "[1]")};
  s.velocity = {require_finite(arr[2], line, field + "[2]"), require_finite(arr[3], line, field + "[3]")};
  s.acceleration = {require_finite(arr[4], line, field + "[4]"), require_finite(arr[5], line, field + "[5]")};
  s.heading = require_finite(arr[6], line, field + "[6]");
  const double valid = require_finite(arr[7], line, field + "[7]");
  if (valid != 0.0 && valid != 1.0) throw ParseError(where(line, field + "[7]") + "valid bit must be 0 or 1");
  s.valid = valid == 1.0;
  if (s.valid) {
    if (s.heading <= -kPi || s.heading > kPi) {
      throw ParseError(where(line, field + "[6]") + "heading outside (-pi, pi]");
    }
  } else {
    if (s.position.x != 0 || s.position.y != 0 || s.velocity.x != 0 || s.velocity.y != 0 ||
        s.acceleration.x != 0 || s.acceleration.y != 0 || s.heading != 0) {
      throw ParseError(where(line, field) + "invalid state must be all-zero");
    }
  }
  return s;
}

}  // namespace

Scenario parse_scenario(const std::string& record, const TimeConfig& time, int line_number) {
  json root;
  try {
    root = json::parse(record);
  } catch (const json::parse_error& e) {
    throw ParseError(where(line_number, "<record>") + e.what());
  }
  if (!root.is_object()) throw ParseError(where(line_number, "<record>") + "expected an object");

  Scenario s;
  s.scenario_id = require_key(root, "scenario_id", line_number, "").get<std::string>();

  const json& agents = require_key(root, "agents", line_number, "");
  if (!agents.is_array() || agents.empty()) {
    throw ParseError(where(line_number, "agents") + "expected a non-empty array");
  }
  const int expected_len = time.total();
  for (size_t ai = 0; ai < agents.size(); ++ai) {
    const std::string ctx = "agents[" + std::to_string(ai) + "]";
    const json& a = agents[ai];
    AgentTrack track;
    track.agent_id = require_key(a, "id", line_number, ctx).get<std::string>();
    track.agent_type = agent_type_from_name(require_key(a, "type", line_number, ctx).get<std::string>());
    const json& states = require_key(a, "states", line_number, ctx);
    if (!states.is_array() || static_cast<int>(states.size()) != expected_len) {
      throw ParseError(where(line_number, ctx + ".states") + "expected " +
                       std::to_string(expected_len) + " states, got " + std::to_string(states.size()));
    }
    track.states.reserve(states.size());
    for (size_t ti = 0; ti < states.size(); ++ti) {
      track.states.push_back(parse_state(states[ti], line_number, ctx + ".states[" + std::to_string(ti) + "]"));
    }
    s.agents.push_back(std::move(track));
  }

  std::set<std::string> ids;
  for (const auto& a : s.agents) {
    if (!ids.insert(a.agent_id).second) {
      throw ValidationError(where(line_number, "agents") + "duplicate agent id '" + a.agent_id + "'");
    }
  }

  const json& map = require_key(root, "map", line_number, "");
  if (!map.is_array()) throw ParseError(where(line_number, "map") + "expected an array");
  for (size_t mi = 0; mi < map.size(); ++mi) {
    const std::string ctx = "map[" + std::to_string(mi) + "]";
    const json& m = map[mi];
    MapPolyline poly;
    poly.kind = map_kind_from_name(require_key(m, "kind", line_number, ctx).get<std::string>());
    const json& points = require_key(m, "points", line_number, ctx);
    if (!points.is_array()) throw ParseError(where(line_number, ctx + ".points") + "expected an array");
    for (size_t pi = 0; pi < points.size(); ++pi) {
      const json& pt = points[pi];
      if (!pt.is_array() || pt.size() != 2) {
        throw ParseError(where(line_number, ctx + ".points") + "point must be [x,y]");
      }
      poly.points.push_back({require_finite(pt[0], line_number, ctx + ".points"),
                             require_finite(pt[1], line_number, ctx + ".points")});
    }
    const size_t min_points = poly.kind == MapKind::kLane ? 2 : 1;
    if (poly.points.size() < min_points) {
      throw ValidationError(where(line_number, ctx + ".points") + "too few points for kind " +
                            map_kind_name(poly.kind));
    }
    if (m.contains("speed_limit")) {
      const double limit = require_finite(m["speed_limit"], line_number, ctx + ".speed_limit");
      if (limit <= 0.0) throw ValidationError(where(line_number, ctx + ".speed_limit") + "must be > 0");
      if (poly.kind != MapKind::kLane) {
        throw ValidationError(where(line_number, ctx + ".speed_limit") + "only lanes carry a speed limit");
      }
      poly.speed_limit = limit;
    }
    s.map.push_back(std::move(poly));
  }

  const json& focal = require_key(root, "focal_ids", line_number, "");
  if (!focal.is_array() || focal.empty()) {
    throw ValidationError(where(line_number, "focal_ids") + "expected a non-empty array");
  }
  for (const auto& f : focal) {
    const std::string id = f.get<std::string>();
    const AgentTrack* track = s.find_agent(id);
    if (track == nullptr) {
      throw ValidationError(where(line_number, "focal_ids") + "focal id '" + id + "' has no track");
    }
    if (track->history_valid_bounds(time.t_hist).first < 0) {
      throw ValidationError(where(line_number, "focal_ids") + "focal agent '" + id +
                            "' has no valid history state");
    }
    s.focal_ids.push_back(id);
  }

  if (root.contains("meta")) {
    const json& meta = root["meta"];
    if (!meta.is_object()) throw ParseError(where(line_number, "meta") + "expected an object");
    for (auto it = meta.begin(); it != meta.end(); ++it) {
      s.meta[it.key()] = it.value().get<std::string>();
    }
  }
  return s;
}

std::string serialize_scenario(const Scenario& s) {
  json root;
  root["scenario_id"] = s.scenario_id;
  json agents = json::array();
  for (const auto& a : s.agents) {
    json states = json::array();
    for (const auto& st : a.states) {
      states.push_back({st.position.x, st.position.y, st.velocity.x, st.velocity.y,
                        st.acceleration.x, st.acceleration.y, st.heading, st.valid ? 1 : 0});
    }
    agents.push_back({{"id", a.agent_id}, {"type", agent_type_name(a.agent_type)}, {"states", std::move(states)}});
  }
  root["agents"] = std::move(agents);
  json map = json::array();
  for (const auto& m : s.map) {
    json poly;
    poly["kind"] = map_kind_name(m.kind);
    json points = json::array();
    for (const auto& p : m.points) points.push_back({p.x, p.y});
    poly["points"] = std::move(points);
    if (m.speed_limit) poly["speed_limit"] = *m.speed_limit;
    map.push_back(std::move(poly));
  }
  root["map"] = std::move(map);
  root["focal_ids"] = s.focal_ids;
  if (!s.meta.empty()) root["meta"] = s.meta;
  return root.dump();
}

std::vector<Scenario> load_corpus(const std::string& path, const TimeConfig& time) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::vector<Scenario> corpus;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    corpus.push_back(parse_scenario(line, time, line_number));
  }
  return corpus;
}

void save_corpus(const std::vector<Scenario>& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open corpus file for writing: " + path);
  for (const auto& s : corpus) out << serialize_scenario(s) << '\n';
}

AgentTrack interpolate_history(const AgentTrack& track, const AgentTrack& reference,
                               const TimeConfig& time) {
  const auto [ref_lo, ref_hi] = reference.history_valid_bounds(time.t_hist);
  if (ref_lo < 0) throw ContractError("interpolate_history: reference has no valid history state");

  AgentTrack out = track;
  const auto [trk_lo, trk_hi] = track.history_valid_bounds(time.t_hist);
  const int lo = std::max(ref_lo, trk_lo);
  const int hi = std::min(ref_hi, trk_hi);

  const int n_hist = std::min<int>(time.t_hist, static_cast<int>(out.states.size()));
  if (trk_lo < 0 || lo > hi) {
    for (int t = 0; t < n_hist; ++t) out.states[t] = AgentState{};
    return out;
  }

  for (int t = 0; t < n_hist; ++t) {
    if (t < lo || t > hi) {
      out.states[t] = AgentState{};
      continue;
    }
    if (track.states[t].valid) continue;

    // Bracketing valid steps exist inside the track's valid hull.
    int a = t - 1;
    while (!track.states[a].valid) --a;
    int b = t + 1;
    while (!track.states[b].valid) ++b;
    const double frac = static_cast<double>(t - a) / static_cast<double>(b - a);
    const AgentState& sa = track.states[a];
    const AgentState& sb = track.states[b];
    AgentState s;
    s.position = sa.position + (sb.position - sa.position) * frac;
    s.velocity = sa.velocity + (sb.velocity - sa.velocity) * frac;
    s.acceleration = sa.acceleration + (sb.acceleration - sa.acceleration) * frac;
    s.heading = normalize_angle(sa.heading + normalize_angle(sb.heading - sa.heading) * frac);
    s.valid = true;
    out.states[t] = s;
  }
  return out;
}

Pose final_pose(const AgentTrack& track, const TimeConfig& time) {
  const int idx = time.t_hist - 1;
  if (idx < 0 || idx >= static_cast<int>(track.states.size()) || !track.states[idx].valid) {
    throw ValidationError("final_pose: agent '" + track.agent_id + "' has no valid state at t_hist");
  }
  return {track.states[idx].position, track.states[idx].heading};
}

}  // namespace ctxbench
