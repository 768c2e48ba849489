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

#ifndef CTXBENCH_SCENARIO_HPP_
#define CTXBENCH_SCENARIO_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxbench/geometry.hpp"

namespace ctxbench {

enum class AgentType { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
inline constexpr int kNumAgentTypes = 3;

enum class MapKind { kLane = 0, kCrosswalk = 1, kStopSign = 2, kTrafficLight = 3, kSpeedBump = 4 };

// The four traffic control device kinds, in feature-group order.
inline constexpr MapKind kTcdKinds[] = {MapKind::kCrosswalk, MapKind::kStopSign,
                                        MapKind::kTrafficLight, MapKind::kSpeedBump};
inline constexpr int kNumTcdKinds = 4;

const char* agent_type_name(AgentType t);
AgentType agent_type_from_name(const std::string& name);
const char* map_kind_name(MapKind k);
MapKind map_kind_from_name(const std::string& name);

// Timestep layout shared by every track in a corpus. History runs over
// timesteps [0, t_hist), the future over [t_hist, t_hist + t_fut).
struct TimeConfig {
  int t_hist = 11;
  int t_fut = 80;
  double dt = 0.1;  // 10 Hz

  int total() const { return t_hist + t_fut; }
};

struct AgentState {
  Vec2 position;
  Vec2 velocity;
  Vec2 acceleration;
  double heading = 0.0;  // radians in (-pi, pi]
  bool valid = false;

  double speed() const { return velocity.norm(); }
};

struct AgentTrack {
  std::string agent_id;
  AgentType agent_type = AgentType::kVehicle;
  std::vector<AgentState> states;  // length t_hist + t_fut

  // First/last valid timestep within [0, t_hist), or {-1, -1} if none.
  std::pair<int, int> history_valid_bounds(int t_hist) const;
  double max_history_speed(int t_hist) const;
};

struct MapPolyline {
  MapKind kind = MapKind::kLane;
  std::vector<Vec2> points;  // >= 2 for lanes, >= 1 otherwise
  std::optional<double> speed_limit;  // m/s, lanes only

  // Tangent heading of segment i (lanes). Clamped at the last segment.
  double segment_heading(size_t segment) const;
};

struct Scenario {
  std::string scenario_id;
  std::vector<AgentTrack> agents;
  std::vector<MapPolyline> map;
  std::vector<std::string> focal_ids;
  std::map<std::string, std::string> meta;  // generator provenance, archetype tags

  const AgentTrack* find_agent(const std::string& agent_id) const;
};

// Parses one line-delimited scenario record. `line_number` is used in error
// messages only. Rejects records violating any type invariant.
Scenario parse_scenario(const std::string& record, const TimeConfig& time, int line_number = 0);

// Canonical single-line form. parse(serialize(s)) reproduces s exactly on any
// scenario built from parsed or synthesized data.
std::string serialize_scenario(const Scenario& s);

std::vector<Scenario> load_corpus(const std::string& path, const TimeConfig& time);
void save_corpus(const std::vector<Scenario>& corpus, const std::string& path);

// Linearly fills invalid history gaps of `track` over the focal agent's valid
// timestep bounds. The output valid mask is the interval hull of the track's
// valid history steps intersected with the reference bounds; the future
// portion is untouched. No valid overlap yields an all-invalid history.
AgentTrack interpolate_history(const AgentTrack& track, const AgentTrack& reference,
                               const TimeConfig& time);

// Position and heading at timestep t_hist (the last history state).
Pose final_pose(const AgentTrack& track, const TimeConfig& time);

}  // namespace ctxbench

#endif  // CTXBENCH_SCENARIO_HPP_
