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

#include "ctxbench/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctxbench/errors.hpp"
#include "ctxbench/hashing.hpp"
#include "ctxbench/rng.hpp"

namespace ctxbench {

using nlohmann::json;

const char* split_setting_name(SplitSetting s) {
  return s == SplitSetting::kClosedWorld ? "closed_world" : "open_world";
}

const char* split_assignment_name(SplitAssignment a) {
  switch (a) {
    case SplitAssignment::kTrain: return "train";
    case SplitAssignment::kVal: return "val";
    case SplitAssignment::kTest: return "test";
  }
  return "train";
}

namespace {

SplitAssignment assignment_from_name(const std::string& name) {
  if (name == "train") return SplitAssignment::kTrain;
  if (name == "val") return SplitAssignment::kVal;
  if (name == "test") return SplitAssignment::kTest;
  throw ParseError("manifest: unknown assignment '" + name + "'");
}

struct GreedyState {
  std::vector<const ContextLabel*> pool;  // still seen
  std::vector<const ContextLabel*> test;
  std::set<int> held_out_ego;
  std::set<int> held_out_social;
};

// Highest mean-difficulty context on `axis` that still has agents in the
// pool and was not held out before. Ties break toward the lower context id.
std::optional<int> pick_context(const GreedyState& state, Axis axis,
                                const ContextDifficulty& difficulties) {
  const auto& means = axis == Axis::kEgo ? difficulties.ego_mean : difficulties.social_mean;
  const auto& held = axis == Axis::kEgo ? state.held_out_ego : state.held_out_social;
  std::set<int> populated;
  for (const auto* label : state.pool) {
    populated.insert(axis == Axis::kEgo ? label->c_e : label->c_s);
  }
  std::optional<int> best;
  double best_difficulty = -std::numeric_limits<double>::infinity();
  for (const int ctx : populated) {
    if (held.count(ctx) > 0) continue;
    const auto it = means.find(ctx);
    if (it == means.end()) continue;  // context with only excluded agents
    if (it->second > best_difficulty) {
      best_difficulty = it->second;
      best = ctx;
    }
  }
  return best;
}

SplitManifest build_split(SplitSetting setting, const std::vector<ContextLabel>& labels,
                          const ContextDifficulty& difficulties, double test_fraction,
                          double val_fraction, uint64_t seed) {
  if (labels.empty()) throw ContractError("build split: empty label table");
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw ValidationError("build split: test_fraction must be in (0, 1)");
  }
  if (val_fraction <= 0.0 || val_fraction >= 1.0) {
    throw ValidationError("build split: val_fraction must be in (0, 1)");
  }

  SplitManifest manifest;
  manifest.setting = setting;
  manifest.test_fraction = test_fraction;
  manifest.val_fraction = val_fraction;
  manifest.seed = seed;

  GreedyState state;
  for (const auto& label : labels) state.pool.push_back(&label);
  const size_t target =
      std::max<size_t>(1, static_cast<size_t>(std::llround(test_fraction * labels.size())));

  Axis axis = Axis::kEgo;  // ego first, alternating
  int stalled_axes = 0;
  while (state.test.size() < target) {
    const std::optional<int> ctx = pick_context(state, axis, difficulties);
    if (!ctx) {
      axis = axis == Axis::kEgo ? Axis::kSocial : Axis::kEgo;
      if (++stalled_axes >= 2) {
        throw ValidationError("build split: contexts exhausted before reaching the test target");
      }
      continue;
    }
    stalled_axes = 0;

    HoldoutStep step;
    step.axis = axis;
    step.context = *ctx;
    const auto& means = axis == Axis::kEgo ? difficulties.ego_mean : difficulties.social_mean;
    step.mean_difficulty = means.at(*ctx);

    std::vector<const ContextLabel*> removed;
    std::vector<const ContextLabel*> remaining;
    for (const auto* label : state.pool) {
      const int c = axis == Axis::kEgo ? label->c_e : label->c_s;
      (c == *ctx ? removed : remaining).push_back(label);
    }
    state.pool = std::move(remaining);
    if (axis == Axis::kEgo) {
      state.held_out_ego.insert(*ctx);
    } else {
      state.held_out_social.insert(*ctx);
    }

    if (setting == SplitSetting::kClosedWorld) {
      // Return the first ceil(n/2) co-occurring paired contexts to the pool.
      std::set<int> paired;
      for (const auto* label : removed) {
        paired.insert(axis == Axis::kEgo ? label->c_s : label->c_e);
      }
      const size_t keep = (paired.size() + 1) / 2;
      std::set<int> add_back(paired.begin(), std::next(paired.begin(), keep));
      std::vector<const ContextLabel*> to_test;
      for (const auto* label : removed) {
        const int other = axis == Axis::kEgo ? label->c_s : label->c_e;
        if (add_back.count(other) > 0) {
          state.pool.push_back(label);
        } else {
          to_test.push_back(label);
        }
      }
      removed = std::move(to_test);
      step.added_back.assign(add_back.begin(), add_back.end());
    }

    step.agents_removed = static_cast<int>(removed.size());
    manifest.trace.push_back(std::move(step));
    state.test.insert(state.test.end(), removed.begin(), removed.end());
    axis = axis == Axis::kEgo ? Axis::kSocial : Axis::kEgo;
  }

  if (state.pool.empty()) {
    throw ValidationError("build split: holdout consumed every agent; lower test_fraction");
  }

  if (setting == SplitSetting::kClosedWorld) {
    // Repair pairs whose marginals vanished from seen entirely: move them
    // back and log. Each move only adds to seen, so this terminates.
    bool changed = true;
    while (changed) {
      changed = false;
      std::set<int> seen_ego, seen_social;
      for (const auto* label : state.pool) {
        seen_ego.insert(label->c_e);
        seen_social.insert(label->c_s);
      }
      std::vector<const ContextLabel*> still_test;
      for (const auto* label : state.test) {
        if (seen_ego.count(label->c_e) == 0 || seen_social.count(label->c_s) == 0) {
          state.pool.push_back(label);
          manifest.moved_back.push_back({label->c_e, label->c_s});
          changed = true;
        } else {
          still_test.push_back(label);
        }
      }
      state.test = std::move(still_test);
    }
    std::sort(manifest.moved_back.begin(), manifest.moved_back.end());
    manifest.moved_back.erase(std::unique(manifest.moved_back.begin(), manifest.moved_back.end()),
                              manifest.moved_back.end());
    if (state.test.empty()) {
      throw ValidationError("build split: closed-world repairs emptied the test set");
    }
  }

  for (const auto* label : state.test) {
    manifest.assignment[label->key] = SplitAssignment::kTest;
    manifest.unseen_pairs.insert({label->c_e, label->c_s});
  }
  std::vector<AgentKey> seen_keys;
  for (const auto* label : state.pool) {
    manifest.seen_pairs.insert({label->c_e, label->c_s});
    seen_keys.push_back(label->key);
  }
  std::sort(seen_keys.begin(), seen_keys.end());
  const auto train_val = partition_train_val(seen_keys, val_fraction, seed);
  for (const auto& [key, a] : train_val) manifest.assignment[key] = a;
  return manifest;
}

}  // namespace

SplitManifest build_open_world(const std::vector<ContextLabel>& labels,
                               const ContextDifficulty& difficulties, double test_fraction,
                               double val_fraction, uint64_t seed) {
  return build_split(SplitSetting::kOpenWorld, labels, difficulties, test_fraction, val_fraction,
                     seed);
}

SplitManifest build_closed_world(const std::vector<ContextLabel>& labels,
                                 const ContextDifficulty& difficulties, double test_fraction,
                                 double val_fraction, uint64_t seed) {
  return build_split(SplitSetting::kClosedWorld, labels, difficulties, test_fraction, val_fraction,
                     seed);
}

std::map<AgentKey, SplitAssignment> partition_train_val(const std::vector<AgentKey>& seen_agents,
                                                        double val_fraction, uint64_t seed) {
  if (val_fraction <= 0.0 || val_fraction >= 1.0) {
    throw ValidationError("partition_train_val: val_fraction must be in (0, 1)");
  }
  std::vector<AgentKey> shuffled = seen_agents;
  Rng rng(Rng::substream(seed, "train_val"));
  rng.shuffle(shuffled);
  const size_t n_val = static_cast<size_t>(std::llround(val_fraction * shuffled.size()));
  std::map<AgentKey, SplitAssignment> out;
  for (size_t i = 0; i < shuffled.size(); ++i) {
    out[shuffled[i]] = i < n_val ? SplitAssignment::kVal : SplitAssignment::kTrain;
  }
  return out;
}

SplitReport verify_split(const SplitManifest& manifest, const std::vector<ContextLabel>& labels,
                         const std::vector<DifficultyRecord>& records) {
  SplitReport report;
  auto violation = [&report](const std::string& msg) { report.violations.push_back(msg); };

  for (const auto& pair : manifest.unseen_pairs) {
    if (manifest.seen_pairs.count(pair) > 0) {
      violation("pair (" + std::to_string(pair.first) + "," + std::to_string(pair.second) +
                ") appears in both seen and unseen");
    }
  }

  std::set<int> seen_ego, seen_social;
  for (const auto& [e, s] : manifest.seen_pairs) {
    seen_ego.insert(e);
    seen_social.insert(s);
  }
  for (const auto& [e, s] : manifest.unseen_pairs) {
    const bool ego_seen = seen_ego.count(e) > 0;
    const bool social_seen = seen_social.count(s) > 0;
    if (manifest.setting == SplitSetting::kClosedWorld) {
      if (!ego_seen || !social_seen) {
        violation("closed-world pair (" + std::to_string(e) + "," + std::to_string(s) +
                  ") has a marginal never observed in seen");
      }
    } else {
      if (ego_seen && social_seen) {
        violation("open-world pair (" + std::to_string(e) + "," + std::to_string(s) +
                  ") has both marginals present in seen");
      }
    }
  }

  std::map<AgentKey, const DifficultyRecord*> difficulty_by_key;
  for (const auto& r : records) difficulty_by_key[r.key] = &r;

  double test_sum = 0.0, val_sum = 0.0, seen_sum = 0.0;
  int test_n = 0, val_n = 0, seen_n = 0;
  for (const auto& label : labels) {
    const auto it = manifest.assignment.find(label.key);
    if (it == manifest.assignment.end()) {
      violation("agent " + label.key.scenario_id + "/" + label.key.agent_id + " has no assignment");
      continue;
    }
    const std::pair<int, int> pair{label.c_e, label.c_s};
    if (it->second == SplitAssignment::kTest) {
      if (manifest.unseen_pairs.count(pair) == 0) {
        violation("test agent " + label.key.agent_id + " carries a pair outside unseen_pairs");
      }
    } else {
      if (manifest.seen_pairs.count(pair) == 0) {
        violation("train/val agent " + label.key.agent_id + " carries a pair outside seen_pairs");
      }
    }
    const auto dit = difficulty_by_key.find(label.key);
    if (dit == difficulty_by_key.end() || dit->second->excluded) continue;
    const double d = dit->second->difficulty;
    if (it->second == SplitAssignment::kTest) {
      test_sum += d;
      ++test_n;
    } else {
      seen_sum += d;
      ++seen_n;
      if (it->second == SplitAssignment::kVal) {
        val_sum += d;
        ++val_n;
      }
    }
  }
  report.test_mean_difficulty = test_n > 0 ? test_sum / test_n : 0.0;
  report.val_mean_difficulty = val_n > 0 ? val_sum / val_n : 0.0;
  report.seen_mean_difficulty = seen_n > 0 ? seen_sum / seen_n : 0.0;
  report.test_val_ratio =
      report.val_mean_difficulty > 0.0 ? report.test_mean_difficulty / report.val_mean_difficulty : 0.0;
  return report;
}

uint64_t SplitManifest::content_hash() const {
  std::ostringstream os;
  os << split_setting_name(setting) << '|' << test_fraction << '|' << val_fraction << '|' << seed;
  for (const auto& [key, a] : assignment) {
    os << '|' << key.scenario_id << '/' << key.agent_id << '=' << split_assignment_name(a);
  }
  for (const auto& [e, s] : seen_pairs) os << "|s" << e << ',' << s;
  for (const auto& [e, s] : unseen_pairs) os << "|u" << e << ',' << s;
  return fnv1a64(os.str());
}

void save_manifest(const SplitManifest& manifest, const std::string& path) {
  json root;
  root["setting"] = split_setting_name(manifest.setting);
  root["test_fraction"] = manifest.test_fraction;
  root["val_fraction"] = manifest.val_fraction;
  root["seed"] = manifest.seed;
  json assignment = json::array();
  for (const auto& [key, a] : manifest.assignment) {
    assignment.push_back({{"scenario_id", key.scenario_id},
                          {"agent_id", key.agent_id},
                          {"set", split_assignment_name(a)}});
  }
  root["assignment"] = std::move(assignment);
  auto pairs_to_json = [](const std::set<std::pair<int, int>>& pairs) {
    json arr = json::array();
    for (const auto& [e, s] : pairs) arr.push_back({e, s});
    return arr;
  };
  root["seen_pairs"] = pairs_to_json(manifest.seen_pairs);
  root["unseen_pairs"] = pairs_to_json(manifest.unseen_pairs);
  json trace = json::array();
  for (const auto& step : manifest.trace) {
    trace.push_back({{"axis", axis_name(step.axis)},
                     {"context", step.context},
                     {"mean_difficulty", step.mean_difficulty},
                     {"agents_removed", step.agents_removed},
                     {"added_back", step.added_back}});
  }
  root["holdout_trace"] = std::move(trace);
  json moved = json::array();
  for (const auto& [e, s] : manifest.moved_back) moved.push_back({e, s});
  root["moved_back"] = std::move(moved);

  std::ofstream out(path);
  if (!out) throw Error("cannot open manifest for writing: " + path);
  out << root.dump(2) << '\n';
}

SplitManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  SplitManifest manifest;
  const std::string setting = root.at("setting").get<std::string>();
  manifest.setting =
      setting == "closed_world" ? SplitSetting::kClosedWorld : SplitSetting::kOpenWorld;
  manifest.test_fraction = root.at("test_fraction").get<double>();
  manifest.val_fraction = root.at("val_fraction").get<double>();
  manifest.seed = root.at("seed").get<uint64_t>();
  for (const auto& entry : root.at("assignment")) {
    const AgentKey key{entry.at("scenario_id").get<std::string>(),
                       entry.at("agent_id").get<std::string>()};
    manifest.assignment[key] = assignment_from_name(entry.at("set").get<std::string>());
  }
  for (const auto& p : root.at("seen_pairs")) {
    manifest.seen_pairs.insert({p[0].get<int>(), p[1].get<int>()});
  }
  for (const auto& p : root.at("unseen_pairs")) {
    manifest.unseen_pairs.insert({p[0].get<int>(), p[1].get<int>()});
  }
  for (const auto& step : root.at("holdout_trace")) {
    HoldoutStep h;
    h.axis = step.at("axis").get<std::string>() == "ego" ? Axis::kEgo : Axis::kSocial;
    h.context = step.at("context").get<int>();
    h.mean_difficulty = step.at("mean_difficulty").get<double>();
    h.agents_removed = step.at("agents_removed").get<int>();
    for (const auto& a : step.at("added_back")) h.added_back.push_back(a.get<int>());
    manifest.trace.push_back(std::move(h));
  }
  for (const auto& p : root.at("moved_back")) {
    manifest.moved_back.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  return manifest;
}

}  // namespace ctxbench
