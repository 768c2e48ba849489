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

#ifndef CTXBENCH_SYNTH_HPP_
#define CTXBENCH_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxbench/scenario.hpp"

namespace ctxbench {

// Behavior archetypes the generator can plant. Each one exercises a known
// slice of the feature space: geometry types, traffic control kinds, and a
// characteristic forecasting difficulty.
//   cruise        straight constant-speed drive, easy future
//   turn          constant-radius turn, curvature-rich, hard future
//   stop_sign     braking to a stop at a stop sign + crosswalk, hard future
//   crossing      perpendicular crossing conflict under a traffic light
//   lead_trail    collinear leader ahead and trailer behind
//   head_on       oncoming agent on-axis plus an opposite-direction passer
//   dense         slow traffic, parallel neighbors both sides, speed bump
//   sparse        lone agent on a gentle arc, bare map
//   ped_cross     pedestrian focal agent crossing in front of a vehicle
//   cyclist_lane  cyclist focal agent being overtaken by a vehicle
const std::vector<std::string>& archetype_names();

struct SynthConfig {
  TimeConfig time;
  // Scenario counts per archetype, in archetype_names() order. Names not
  // listed default to zero.
  std::vector<std::pair<std::string, int>> counts;

  int total_count() const;
};

// Deterministic for a fixed seed: two runs produce byte-identical corpora.
// Scenario meta carries the archetype tag plus planted ground truth
// (partner id, geometry leaf, conflict timing) for test oracles.
std::vector<Scenario> synthesize_corpus(const SynthConfig& config, uint64_t seed);

}  // namespace ctxbench

#endif  // CTXBENCH_SYNTH_HPP_
