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

#include "ctxbench/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"
#include "ctxbench/evaluation.hpp"
#include "ctxbench/hashing.hpp"
#include "ctxbench/vectorize.hpp"

namespace ctxbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void maybe(const json& obj, const char* key, T* out) {
  if (obj.contains(key)) *out = obj.at(key).get<T>();
}

json time_to_json(const TimeConfig& t) {
  return {{"t_hist", t.t_hist}, {"t_fut", t.t_fut}, {"dt", t.dt}};
}

void time_from_json(const json& j, TimeConfig* t) {
  maybe(j, "t_hist", &t->t_hist);
  maybe(j, "t_fut", &t->t_fut);
  maybe(j, "dt", &t->dt);
}

json features_to_json(const FeatureConfig& f) {
  return {{"heading_thresh", f.heading_thresh},
          {"lane_lateral_thresh", f.lane_lateral_thresh},
          {"interaction_radius", f.interaction_radius},
          {"collinear_lateral", f.collinear_lateral},
          {"conflict_horizon", f.conflict_horizon},
          {"stationary_floor", f.stationary_floor},
          {"speed_floor", f.speed_floor},
          {"conflict_radius", f.conflict_radius}};
}

void features_from_json(const json& j, FeatureConfig* f) {
  maybe(j, "heading_thresh", &f->heading_thresh);
  maybe(j, "lane_lateral_thresh", &f->lane_lateral_thresh);
  maybe(j, "interaction_radius", &f->interaction_radius);
  maybe(j, "collinear_lateral", &f->collinear_lateral);
  maybe(j, "conflict_horizon", &f->conflict_horizon);
  maybe(j, "stationary_floor", &f->stationary_floor);
  maybe(j, "speed_floor", &f->speed_floor);
  maybe(j, "conflict_radius", &f->conflict_radius);
}

json autoencoder_to_json(const AutoencoderConfig& a) {
  return {{"hidden", a.hidden},       {"latent", a.latent},
          {"dropout", a.dropout},     {"dec_clusters", a.dec_clusters},
          {"lambda_dec", a.lambda_dec}, {"warmup_frac", a.warmup_frac},
          {"p_refresh", a.p_refresh}, {"epochs", a.epochs},
          {"batch", a.batch},         {"lr", a.lr},
          {"momentum", a.momentum},   {"lr_decay", a.lr_decay},
          {"lr_step", a.lr_step},     {"min_samples", a.min_samples}};
}

void autoencoder_from_json(const json& j, AutoencoderConfig* a) {
  maybe(j, "hidden", &a->hidden);
  maybe(j, "latent", &a->latent);
  maybe(j, "dropout", &a->dropout);
  maybe(j, "dec_clusters", &a->dec_clusters);
  maybe(j, "lambda_dec", &a->lambda_dec);
  maybe(j, "warmup_frac", &a->warmup_frac);
  maybe(j, "p_refresh", &a->p_refresh);
  maybe(j, "epochs", &a->epochs);
  maybe(j, "batch", &a->batch);
  maybe(j, "lr", &a->lr);
  maybe(j, "momentum", &a->momentum);
  maybe(j, "lr_decay", &a->lr_decay);
  maybe(j, "lr_step", &a->lr_step);
  maybe(j, "min_samples", &a->min_samples);
}

json kalman_to_json(const KalmanConfig& k) {
  return {{"process_noise", k.process_noise},
          {"measurement_noise", k.measurement_noise},
          {"horizons", k.horizons}};
}

void kalman_from_json(const json& j, KalmanConfig* k) {
  maybe(j, "process_noise", &k->process_noise);
  maybe(j, "measurement_noise", &k->measurement_noise);
  maybe(j, "horizons", &k->horizons);
}

json predictor_to_json(const PredictorConfig& p) {
  return {{"d_h", p.d_h},
          {"d_mod", p.d_mod},
          {"n_layers", p.n_layers},
          {"m_modules", p.m_modules},
          {"gating_hidden", p.gating_hidden},
          {"encoder_hidden", p.encoder_hidden},
          {"k_neighbors", p.k_neighbors},
          {"modes", p.modes},
          {"latent", p.latent},
          {"lambda_cls", p.lambda_cls},
          {"lambda_aux", p.lambda_aux},
          {"epochs", p.epochs},
          {"batch", p.batch},
          {"lr", p.lr},
          {"momentum", p.momentum},
          {"lr_decay", p.lr_decay},
          {"lr_step", p.lr_step}};
}

void predictor_from_json(const json& j, PredictorConfig* p) {
  maybe(j, "d_h", &p->d_h);
  maybe(j, "d_mod", &p->d_mod);
  maybe(j, "n_layers", &p->n_layers);
  maybe(j, "m_modules", &p->m_modules);
  maybe(j, "gating_hidden", &p->gating_hidden);
  maybe(j, "encoder_hidden", &p->encoder_hidden);
  maybe(j, "k_neighbors", &p->k_neighbors);
  maybe(j, "modes", &p->modes);
  maybe(j, "latent", &p->latent);
  maybe(j, "lambda_cls", &p->lambda_cls);
  maybe(j, "lambda_aux", &p->lambda_aux);
  maybe(j, "epochs", &p->epochs);
  maybe(j, "batch", &p->batch);
  maybe(j, "lr", &p->lr);
  maybe(j, "momentum", &p->momentum);
  maybe(j, "lr_decay", &p->lr_decay);
  maybe(j, "lr_step", &p->lr_step);
}

json config_to_json(const PipelineConfig& c) {
  json counts = json::object();
  for (const auto& [name, count] : c.synth.counts) counts[name] = count;
  json root;
  root["out_dir"] = c.out_dir;
  root["seed"] = c.seed;
  root["time"] = time_to_json(c.time);
  root["synth_counts"] = std::move(counts);
  root["features"] = features_to_json(c.features);
  root["autoencoder"] = autoencoder_to_json(c.autoencoder);
  root["cluster"] = {{"k", c.cluster.k}, {"holdout_fraction", c.cluster.holdout_fraction}};
  root["kalman"] = kalman_to_json(c.kalman);
  root["split"] = {{"setting", split_setting_name(c.split.setting)},
                   {"test_fraction", c.split.test_fraction},
                   {"val_fraction", c.split.val_fraction}};
  root["predictor"] = predictor_to_json(c.predictor);
  root["eval"] = {{"bins", c.eval.bins}};
  root["methods"] = c.methods;
  return root;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  PipelineConfig c;
  maybe(root, "out_dir", &c.out_dir);
  maybe(root, "seed", &c.seed);
  if (root.contains("time")) time_from_json(root["time"], &c.time);
  c.synth.time = c.time;
  if (root.contains("synth_counts")) {
    for (const std::string& name : archetype_names()) {
      if (root["synth_counts"].contains(name)) {
        c.synth.counts.push_back({name, root["synth_counts"][name].get<int>()});
      }
    }
    for (auto it = root["synth_counts"].begin(); it != root["synth_counts"].end(); ++it) {
      const auto& names = archetype_names();
      if (std::find(names.begin(), names.end(), it.key()) == names.end()) {
        throw ValidationError("config: unknown archetype '" + it.key() + "'");
      }
    }
  }
  if (root.contains("features")) features_from_json(root["features"], &c.features);
  if (root.contains("autoencoder")) autoencoder_from_json(root["autoencoder"], &c.autoencoder);
  if (root.contains("cluster")) {
    maybe(root["cluster"], "k", &c.cluster.k);
    maybe(root["cluster"], "holdout_fraction", &c.cluster.holdout_fraction);
  }
  if (root.contains("kalman")) kalman_from_json(root["kalman"], &c.kalman);
  if (root.contains("split")) {
    const json& s = root["split"];
    if (s.contains("setting")) {
      const std::string setting = s["setting"].get<std::string>();
      if (setting == "closed_world" || setting == "closed") {
        c.split.setting = SplitSetting::kClosedWorld;
      } else if (setting == "open_world" || setting == "open") {
        c.split.setting = SplitSetting::kOpenWorld;
      } else {
        throw ValidationError("config: unknown split setting '" + setting + "'");
      }
    }
    maybe(s, "test_fraction", &c.split.test_fraction);
    maybe(s, "val_fraction", &c.split.val_fraction);
  }
  if (root.contains("predictor")) predictor_from_json(root["predictor"], &c.predictor);
  if (root.contains("eval")) maybe(root["eval"], "bins", &c.eval.bins);
  maybe(root, "methods", &c.methods);
  // The gating network consumes the autoencoder latents; keep widths in sync.
  c.predictor.latent = c.autoencoder.latent;

  if (c.features.heading_thresh <= 0 || c.features.lane_lateral_thresh <= 0 ||
      c.features.interaction_radius <= 0 || c.features.collinear_lateral <= 0) {
    throw ValidationError("config: thresholds must be positive");
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c = parse_pipeline_config(ss.str());
  return c;
}

void write_resolved_config(const PipelineConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write resolved config: " + path);
  out << config_to_json(config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Stage bookkeeping
// ---------------------------------------------------------------------------

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::kSynth,   Stage::kExtract,   Stage::kVectorize,
                                            Stage::kAutoencode, Stage::kCluster, Stage::kDifficulty,
                                            Stage::kSplit,   Stage::kTrain,     Stage::kEval};
  return stages;
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kSynth: return "synth";
    case Stage::kExtract: return "extract";
    case Stage::kVectorize: return "vectorize";
    case Stage::kAutoencode: return "autoencode";
    case Stage::kCluster: return "cluster";
    case Stage::kDifficulty: return "difficulty";
    case Stage::kSplit: return "split";
    case Stage::kTrain: return "train";
    case Stage::kEval: return "eval";
  }
  return "synth";
}

Stage stage_from_name(const std::string& name) {
  for (const Stage s : all_stages()) {
    if (name == stage_name(s)) return s;
  }
  throw ValidationError("unknown stage: " + name);
}

namespace {

std::vector<Stage> stage_deps(Stage stage) {
  switch (stage) {
    case Stage::kSynth: return {};
    case Stage::kExtract: return {Stage::kSynth};
    case Stage::kVectorize: return {Stage::kExtract};
    case Stage::kAutoencode: return {Stage::kVectorize};
    case Stage::kCluster: return {Stage::kAutoencode};
    case Stage::kDifficulty: return {Stage::kSynth};
    case Stage::kSplit: return {Stage::kCluster, Stage::kDifficulty};
    case Stage::kTrain: return {Stage::kSynth, Stage::kVectorize, Stage::kSplit, Stage::kDifficulty};
    case Stage::kEval: return {Stage::kSynth, Stage::kSplit, Stage::kDifficulty, Stage::kTrain};
  }
  return {};
}

std::string stage_config_digest(Stage stage, const PipelineConfig& c) {
  json j;
  switch (stage) {
    case Stage::kSynth: {
      json counts = json::object();
      for (const auto& [name, count] : c.synth.counts) counts[name] = count;
      j = {{"time", time_to_json(c.time)}, {"counts", counts}, {"seed", c.seed}};
      break;
    }
    case Stage::kExtract:
      j = {{"time", time_to_json(c.time)}, {"features", features_to_json(c.features)}};
      break;
    case Stage::kVectorize:
      j = {{"dt", c.time.dt}};
      break;
    case Stage::kAutoencode:
      j = {{"autoencoder", autoencoder_to_json(c.autoencoder)}, {"seed", c.seed}};
      break;
    case Stage::kCluster:
      j = {{"k", c.cluster.k}, {"holdout_fraction", c.cluster.holdout_fraction}, {"seed", c.seed}};
      break;
    case Stage::kDifficulty:
      j = {{"kalman", kalman_to_json(c.kalman)}, {"time", time_to_json(c.time)}};
      break;
    case Stage::kSplit:
      j = {{"setting", split_setting_name(c.split.setting)},
           {"test_fraction", c.split.test_fraction},
           {"val_fraction", c.split.val_fraction},
           {"seed", c.seed}};
      break;
    case Stage::kTrain:
      j = {{"predictor", predictor_to_json(c.predictor)},
           {"autoencoder", autoencoder_to_json(c.autoencoder)},
           {"features", features_to_json(c.features)},
           {"methods", c.methods},
           {"seed", c.seed}};
      break;
    case Stage::kEval:
      j = {{"bins", c.eval.bins}, {"methods", c.methods}, {"features", features_to_json(c.features)}};
      break;
  }
  return hash_hex(fnv1a64(j.dump()));
}

struct StageEntry {
  std::string config_hash;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  uint64_t seed = 0;
};

struct RunManifest {
  std::map<std::string, StageEntry> stages;
};

RunManifest load_run_manifest(const std::string& path) {
  RunManifest manifest;
  std::ifstream in(path);
  if (!in) return manifest;
  json root;
  try {
    in >> root;
  } catch (const json::parse_error& e) {
    throw ParseError("run manifest: " + std::string(e.what()));
  }
  for (auto it = root["stages"].begin(); it != root["stages"].end(); ++it) {
    StageEntry entry;
    entry.config_hash = it.value().at("config_hash").get<std::string>();
    entry.seed = it.value().at("seed").get<uint64_t>();
    for (auto f = it.value()["inputs"].begin(); f != it.value()["inputs"].end(); ++f) {
      entry.inputs[f.key()] = f.value().get<std::string>();
    }
    for (auto f = it.value()["outputs"].begin(); f != it.value()["outputs"].end(); ++f) {
      entry.outputs[f.key()] = f.value().get<std::string>();
    }
    manifest.stages[it.key()] = std::move(entry);
  }
  return manifest;
}

void save_run_manifest(const RunManifest& manifest, const std::string& path) {
  json stages = json::object();
  for (const auto& [name, entry] : manifest.stages) {
    json inputs = json::object();
    for (const auto& [f, h] : entry.inputs) inputs[f] = h;
    json outputs = json::object();
    for (const auto& [f, h] : entry.outputs) outputs[f] = h;
    stages[name] = {{"config_hash", entry.config_hash},
                    {"seed", entry.seed},
                    {"inputs", std::move(inputs)},
                    {"outputs", std::move(outputs)}};
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write run manifest: " + path);
  out << json{{"stages", std::move(stages)}}.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Feature-set (de)serialization for the extract artifact
// ---------------------------------------------------------------------------

json series_json(const std::vector<double>& v) { return json(v); }

json kinematics_to_json(const RelativeKinematics& k) {
  return {{"span_start", k.span_start}, {"px", series_json(k.px)},   {"py", series_json(k.py)},
          {"vx", series_json(k.vx)},    {"vy", series_json(k.vy)},   {"ax", series_json(k.ax)},
          {"ay", series_json(k.ay)},    {"curvature", series_json(k.curvature)}};
}

RelativeKinematics kinematics_from_json(const json& j) {
  RelativeKinematics k;
  k.span_start = j.at("span_start").get<int>();
  k.px = j.at("px").get<std::vector<double>>();
  k.py = j.at("py").get<std::vector<double>>();
  k.vx = j.at("vx").get<std::vector<double>>();
  k.vy = j.at("vy").get<std::vector<double>>();
  k.ax = j.at("ax").get<std::vector<double>>();
  k.ay = j.at("ay").get<std::vector<double>>();
  k.curvature = j.at("curvature").get<std::vector<double>>();
  return k;
}

json tcd_to_json(const std::optional<TcdProximity>& t) {
  if (!t) return nullptr;
  return {{"kind", map_kind_name(t->kind)},
          {"distance", t->distance},
          {"relative_heading", t->relative_heading},
          {"is_forward", t->is_forward}};
}

std::optional<TcdProximity> tcd_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  TcdProximity t;
  t.kind = map_kind_from_name(j.at("kind").get<std::string>());
  t.distance = j.at("distance").get<double>();
  t.relative_heading = j.at("relative_heading").get<double>();
  t.is_forward = j.at("is_forward").get<bool>();
  return t;
}

json ego_to_json(const EgoFeatureSet& e) {
  json lane = nullptr;
  if (e.lane) {
    lane = {{"lane_ref", e.lane->lane_ref},
            {"frenet_s", series_json(e.lane->frenet_s)},
            {"frenet_d", series_json(e.lane->frenet_d)},
            {"compliance", series_json(e.lane->compliance)},
            {"heading_diff", e.lane->heading_diff},
            {"lateral_offset", e.lane->lateral_offset}};
  }
  json closest = json::array();
  json forward = json::array();
  for (int k = 0; k < kNumTcdKinds; ++k) {
    closest.push_back(tcd_to_json(e.tcd_closest[k]));
    forward.push_back(tcd_to_json(e.tcd_forward[k]));
  }
  return {{"kinematics", kinematics_to_json(e.kinematics)},
          {"lane", std::move(lane)},
          {"tcd_closest", std::move(closest)},
          {"tcd_forward", std::move(forward)}};
}

EgoFeatureSet ego_from_json(const json& j) {
  EgoFeatureSet e;
  e.kinematics = kinematics_from_json(j.at("kinematics"));
  if (!j.at("lane").is_null()) {
    LaneAssignment lane;
    const json& l = j.at("lane");
    lane.lane_ref = l.at("lane_ref").get<int>();
    lane.frenet_s = l.at("frenet_s").get<std::vector<double>>();
    lane.frenet_d = l.at("frenet_d").get<std::vector<double>>();
    lane.compliance = l.at("compliance").get<std::vector<double>>();
    lane.heading_diff = l.at("heading_diff").get<double>();
    lane.lateral_offset = l.at("lateral_offset").get<double>();
    e.lane = std::move(lane);
  }
  for (int k = 0; k < kNumTcdKinds; ++k) {
    e.tcd_closest[k] = tcd_from_json(j.at("tcd_closest")[k]);
    e.tcd_forward[k] = tcd_from_json(j.at("tcd_forward")[k]);
  }
  return e;
}

json social_to_json(const InteractionFeatureSet& s) {
  json slots = json::array();
  for (int leaf = 0; leaf < kNumGeometryLeaves; ++leaf) {
    const auto& slot = s.slots[leaf];
    if (!slot) {
      slots.push_back(nullptr);
      continue;
    }
    slots.push_back(
        {{"agent_id", slot->agent_id},
         {"other_type", agent_type_name(slot->other_type)},
         {"distance", slot->distance},
         {"rel_final", kinematics_to_json(slot->rel_final)},
         {"per_pose_px", series_json(slot->per_pose_px)},
         {"per_pose_py", series_json(slot->per_pose_py)},
         {"per_pose_vx", series_json(slot->per_pose_vx)},
         {"per_pose_vy", series_json(slot->per_pose_vy)},
         {"closing_speed", series_json(slot->closing_speed)},
         {"delta_ttcp", series_json(slot->delta_ttcp_series)},
         {"conflict",
          {{"exists", slot->conflict.exists},
           {"location", {slot->conflict.location.x, slot->conflict.location.y}},
           {"distance", slot->conflict.distance},
           {"rel", {slot->conflict.relative_position.x, slot->conflict.relative_position.y}},
           {"bearing", slot->conflict.bearing},
           {"ttcp_focal", slot->conflict.ttcp_focal},
           {"ttcp_other", slot->conflict.ttcp_other},
           {"delta_ttcp", slot->conflict.delta_ttcp}}}});
  }
  return {{"density", s.density}, {"slots", std::move(slots)}};
}

InteractionFeatureSet social_from_json(const json& j) {
  InteractionFeatureSet s;
  s.density = j.at("density").get<int>();
  for (int leaf = 0; leaf < kNumGeometryLeaves; ++leaf) {
    const json& slot = j.at("slots")[leaf];
    if (slot.is_null()) continue;
    InteractionSlot out;
    out.agent_id = slot.at("agent_id").get<std::string>();
    out.other_type = agent_type_from_name(slot.at("other_type").get<std::string>());
    out.distance = slot.at("distance").get<double>();
    out.rel_final = kinematics_from_json(slot.at("rel_final"));
    out.per_pose_px = slot.at("per_pose_px").get<std::vector<double>>();
    out.per_pose_py = slot.at("per_pose_py").get<std::vector<double>>();
    out.per_pose_vx = slot.at("per_pose_vx").get<std::vector<double>>();
    out.per_pose_vy = slot.at("per_pose_vy").get<std::vector<double>>();
    out.closing_speed = slot.at("closing_speed").get<std::vector<double>>();
    out.delta_ttcp_series = slot.at("delta_ttcp").get<std::vector<double>>();
    const json& c = slot.at("conflict");
    out.conflict.exists = c.at("exists").get<bool>();
    out.conflict.location = {c.at("location")[0].get<double>(), c.at("location")[1].get<double>()};
    out.conflict.distance = c.at("distance").get<double>();
    out.conflict.relative_position = {c.at("rel")[0].get<double>(), c.at("rel")[1].get<double>()};
    out.conflict.bearing = c.at("bearing").get<double>();
    out.conflict.ttcp_focal = c.at("ttcp_focal").get<double>();
    out.conflict.ttcp_other = c.at("ttcp_other").get<double>();
    out.conflict.delta_ttcp = c.at("delta_ttcp").get<double>();
    s.slots[leaf] = std::move(out);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stage implementations
// ---------------------------------------------------------------------------

struct StagePaths {
  fs::path dir;

  std::string rel(const std::string& name) const { return name; }
  fs::path abs(const std::string& name) const { return dir / name; }
};

std::vector<std::string> run_synth(const PipelineConfig& c, const StagePaths& p) {
  SynthConfig synth = c.synth;
  synth.time = c.time;
  const std::vector<Scenario> corpus = synthesize_corpus(synth, c.seed);
  save_corpus(corpus, p.abs("corpus.jsonl").string());
  return {"corpus.jsonl"};
}

std::vector<std::string> run_extract(const PipelineConfig& c, const StagePaths& p) {
  const std::vector<Scenario> corpus = load_corpus(p.abs("corpus.jsonl").string(), c.time);
  std::ofstream out(p.abs("features.jsonl"));
  if (!out) throw Error("cannot write features.jsonl");
  for (const Scenario& scenario : corpus) {
    for (const std::string& focal_id : scenario.focal_ids) {
      const AgentTrack* focal = scenario.find_agent(focal_id);
      const AgentTrack interp = interpolate_history(*focal, *focal, c.time);
      const EgoFeatureSet ego = extract_ego_features(interp, scenario.map, c.time, c.features);
      const InteractionFeatureSet social =
          select_interactions(scenario, focal_id, c.time, c.features);
      json row = {{"scenario_id", scenario.scenario_id},
                  {"agent_id", focal_id},
                  {"agent_type", agent_type_name(focal->agent_type)},
                  {"ego", ego_to_json(ego)},
                  {"social", social_to_json(social)}};
      out << row.dump() << '\n';
    }
  }
  return {"features.jsonl"};
}

std::vector<std::string> run_vectorize(const PipelineConfig& c, const StagePaths& p) {
  const GroupSchema ego_schema = vector_schema(Axis::kEgo);
  const GroupSchema social_schema = vector_schema(Axis::kSocial);

  CsvTable ego_table, social_table;
  ego_table.header = {"scenario_id", "agent_id", "agent_type"};
  for (const auto& d : ego_schema.dim_names) ego_table.header.push_back(d);
  social_table.header = {"scenario_id", "agent_id", "agent_type"};
  for (const auto& d : social_schema.dim_names) social_table.header.push_back(d);

  std::ifstream in(p.abs("features.jsonl"));
  if (!in) throw Error("cannot open features.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json row = json::parse(line);
    const EgoFeatureSet ego = ego_from_json(row.at("ego"));
    const InteractionFeatureSet social = social_from_json(row.at("social"));
    const FeatureVector ve = build_vector(ego, ego_schema, c.time.dt);
    const FeatureVector vs = build_vector(social, social_schema, c.time.dt);
    std::vector<std::string> ego_row = {row.at("scenario_id").get<std::string>(),
                                        row.at("agent_id").get<std::string>(),
                                        row.at("agent_type").get<std::string>()};
    std::vector<std::string> social_row = ego_row;
    for (const double v : ve.values) ego_row.push_back(format_double(v));
    for (const double v : vs.values) social_row.push_back(format_double(v));
    ego_table.rows.push_back(std::move(ego_row));
    social_table.rows.push_back(std::move(social_row));
  }
  write_csv(p.abs("vectors_ego.csv").string(), ego_table);
  write_csv(p.abs("vectors_social.csv").string(), social_table);
  write_schema_manifest(ego_schema, p.abs("schema_ego.txt").string());
  write_schema_manifest(social_schema, p.abs("schema_social.txt").string());
  return {"vectors_ego.csv", "vectors_social.csv", "schema_ego.txt", "schema_social.txt"};
}

struct VectorRows {
  std::vector<AgentKey> keys;
  std::vector<AgentType> types;
  std::vector<std::vector<double>> rows;
};

VectorRows load_vectors(const std::string& path, int expected_width) {
  const CsvTable table = read_csv(path);
  if (static_cast<int>(table.header.size()) != expected_width + 3) {
    throw ValidationError("vectors file width mismatch: " + path);
  }
  VectorRows out;
  for (const auto& row : table.rows) {
    out.keys.push_back({row[0], row[1]});
    out.types.push_back(agent_type_from_name(row[2]));
    std::vector<double> values;
    values.reserve(row.size() - 3);
    for (size_t i = 3; i < row.size(); ++i) values.push_back(std::stod(row[i]));
    out.rows.push_back(std::move(values));
  }
  return out;
}

std::string ae_model_file(const char* prefix, Axis axis, AgentType type) {
  return std::string("models/") + prefix + "_" + axis_name(axis) + "_" + agent_type_name(type) +
         ".txt";
}

std::vector<std::string> run_autoencode(const PipelineConfig& c, const StagePaths& p) {
  const GroupSchema ego_schema = vector_schema(Axis::kEgo);
  const GroupSchema social_schema = vector_schema(Axis::kSocial);
  const VectorRows ego = load_vectors(p.abs("vectors_ego.csv").string(), ego_schema.width);
  const VectorRows social = load_vectors(p.abs("vectors_social.csv").string(), social_schema.width);

  fs::create_directories(p.abs("models"));
  std::vector<std::string> outputs;
  CsvTable latents;
  latents.header = {"scenario_id", "agent_id", "agent_type", "axis"};
  for (int i = 0; i < c.autoencoder.latent; ++i) latents.header.push_back("z" + std::to_string(i));

  ModelRegistry registry;
  for (const Axis axis : {Axis::kEgo, Axis::kSocial}) {
    const VectorRows& data = axis == Axis::kEgo ? ego : social;
    const GroupSchema& schema = axis == Axis::kEgo ? ego_schema : social_schema;
    for (int ti = 0; ti < kNumAgentTypes; ++ti) {
      const AgentType type = static_cast<AgentType>(ti);
      std::vector<std::vector<double>> rows;
      std::vector<size_t> row_indices;
      for (size_t i = 0; i < data.rows.size(); ++i) {
        if (data.types[i] == type) {
          rows.push_back(data.rows[i]);
          row_indices.push_back(i);
        }
      }
      if (static_cast<int>(rows.size()) < c.autoencoder.min_samples) continue;
      const uint64_t seed = Rng::substream(
          c.seed, std::string("autoencode_") + axis_name(axis) + "_" + agent_type_name(type));
      TrainedAutoencoder trained =
          train_autoencoder(rows, axis, type, schema, c.autoencoder, seed);
      const std::string file = ae_model_file("ae", axis, type);
      save_autoencoder(trained.model, p.abs(file).string());
      outputs.push_back(file);

      const Matrix z = trained.model.encode(rows);
      for (size_t r = 0; r < row_indices.size(); ++r) {
        const size_t i = row_indices[r];
        std::vector<std::string> row = {data.keys[i].scenario_id, data.keys[i].agent_id,
                                        agent_type_name(type), axis_name(axis)};
        for (int d = 0; d < z.cols(); ++d) row.push_back(format_double(z(r, d)));
        latents.rows.push_back(std::move(row));
      }
      registry.add(std::move(trained.model));
    }
  }
  if (registry.size() == 0) {
    throw ValidationError("autoencode: no agent type reached min_samples");
  }
  write_csv(p.abs("latents.csv").string(), latents);
  outputs.push_back("latents.csv");
  return outputs;
}

struct LatentRows {
  std::vector<AgentLatents> agents;  // merged over both axes
};

LatentRows load_latents(const std::string& path, int latent_width) {
  const CsvTable table = read_csv(path);
  std::map<std::pair<std::string, std::string>, AgentLatents> merged;
  for (const auto& row : table.rows) {
    const auto key = std::make_pair(row[0], row[1]);
    AgentLatents& agent = merged[key];
    agent.key = {row[0], row[1]};
    agent.agent_type = agent_type_from_name(row[2]);
    Eigen::RowVectorXd z(latent_width);
    for (int i = 0; i < latent_width; ++i) z(i) = std::stod(row[4 + i]);
    if (row[3] == "ego") {
      agent.ego = z;
    } else {
      agent.social = z;
    }
  }
  LatentRows out;
  for (auto& [key, agent] : merged) {
    if (agent.ego.size() == 0 || agent.social.size() == 0) {
      throw ValidationError("latents: agent " + key.first + "/" + key.second +
                            " is missing an axis");
    }
    out.agents.push_back(std::move(agent));
  }
  return out;
}

std::vector<std::string> run_cluster(const PipelineConfig& c, const StagePaths& p) {
  const LatentRows latents = load_latents(p.abs("latents.csv").string(), c.autoencoder.latent);

  std::vector<ContextModel> ego_models, social_models;
  CsvTable quality;
  quality.header = {"axis", "agent_type", "k", "n_fit", "n_holdout", "silhouette"};

  for (const Axis axis : {Axis::kEgo, Axis::kSocial}) {
    for (int ti = 0; ti < kNumAgentTypes; ++ti) {
      const AgentType type = static_cast<AgentType>(ti);
      std::vector<int> members;
      for (size_t i = 0; i < latents.agents.size(); ++i) {
        if (latents.agents[i].agent_type == type) members.push_back(static_cast<int>(i));
      }
      if (members.empty()) continue;
      if (static_cast<int>(members.size()) < c.cluster.k + 2) {
        throw ValidationError("cluster: too few agents of type " +
                              std::string(agent_type_name(type)));
      }
      // Seeded fit/holdout split; the model fits on the fit portion and the
      // silhouette scores the held-out assignments.
      Rng rng(Rng::substream(c.seed, std::string("cluster_") + axis_name(axis) + "_" +
                                         agent_type_name(type)));
      std::vector<int> shuffled = members;
      rng.shuffle(shuffled);
      size_t n_holdout = static_cast<size_t>(c.cluster.holdout_fraction * shuffled.size());
      if (shuffled.size() - n_holdout < static_cast<size_t>(c.cluster.k)) {
        n_holdout = shuffled.size() - c.cluster.k;
      }
      const size_t n_fit = shuffled.size() - n_holdout;

      Matrix fit_points(n_fit, c.autoencoder.latent);
      for (size_t i = 0; i < n_fit; ++i) {
        const AgentLatents& a = latents.agents[shuffled[i]];
        fit_points.row(i) = axis == Axis::kEgo ? a.ego : a.social;
      }
      const KMeansResult km = kmeans(fit_points, c.cluster.k, rng.next_u64());

      double holdout_silhouette = 0.0;
      if (n_holdout >= 2) {
        Matrix holdout_points(n_holdout, c.autoencoder.latent);
        std::vector<int> holdout_assign(n_holdout);
        std::set<int> distinct;
        for (size_t i = 0; i < n_holdout; ++i) {
          const AgentLatents& a = latents.agents[shuffled[n_fit + i]];
          holdout_points.row(i) = axis == Axis::kEgo ? a.ego : a.social;
          holdout_assign[i] = nearest_centroid(km.centroids, holdout_points.row(i));
          distinct.insert(holdout_assign[i]);
        }
        if (distinct.size() >= 2) {
          holdout_silhouette = silhouette(holdout_points, holdout_assign);
        }
      }
      quality.rows.push_back({axis_name(axis), agent_type_name(type), std::to_string(c.cluster.k),
                              std::to_string(n_fit), std::to_string(n_holdout),
                              format_double(holdout_silhouette)});

      ContextModel model;
      model.axis = axis;
      model.agent_type = type;
      model.k = c.cluster.k;
      model.centroids = km.centroids;
      (axis == Axis::kEgo ? ego_models : social_models).push_back(std::move(model));
    }
  }

  const std::vector<ContextLabel> labels =
      assign_contexts(latents.agents, ego_models, social_models);
  write_label_table(labels, p.abs("labels.csv").string());
  write_csv(p.abs("cluster_quality.csv").string(), quality);
  return {"labels.csv", "cluster_quality.csv"};
}

std::vector<std::string> run_difficulty(const PipelineConfig& c, const StagePaths& p) {
  const std::vector<Scenario> corpus = load_corpus(p.abs("corpus.jsonl").string(), c.time);
  std::vector<DifficultyRecord> records;
  for (const Scenario& scenario : corpus) {
    for (const std::string& focal_id : scenario.focal_ids) {
      const AgentTrack* focal = scenario.find_agent(focal_id);
      const AgentTrack interp = interpolate_history(*focal, *focal, c.time);
      DifficultyRecord record = kalman_difficulty(interp, c.time, c.kalman);
      record.key.scenario_id = scenario.scenario_id;
      records.push_back(std::move(record));
    }
  }
  write_difficulty_table(records, c.kalman, p.abs("difficulty.csv").string());
  return {"difficulty.csv"};
}

std::vector<std::string> run_split(const PipelineConfig& c, const StagePaths& p) {
  const std::vector<ContextLabel> labels = read_label_table(p.abs("labels.csv").string());
  const std::vector<DifficultyRecord> records =
      read_difficulty_table(p.abs("difficulty.csv").string());
  const ContextDifficulty difficulties = context_difficulty(labels, records);
  const SplitManifest manifest =
      c.split.setting == SplitSetting::kOpenWorld
          ? build_open_world(labels, difficulties, c.split.test_fraction, c.split.val_fraction,
                             c.seed)
          : build_closed_world(labels, difficulties, c.split.test_fraction, c.split.val_fraction,
                               c.seed);
  const SplitReport report = verify_split(manifest, labels, records);
  if (!report.ok()) {
    std::string msg = "split verification failed:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  save_manifest(manifest, p.abs("split.json").string());
  return {"split.json"};
}

}  // namespace

ExampleBundle build_examples(const PipelineConfig& c, const std::string& run_dir,
                             const SplitManifest& manifest, const ModelRegistry& registry) {
  const StagePaths p{fs::path(run_dir)};
  const std::vector<Scenario> corpus = load_corpus(p.abs("corpus.jsonl").string(), c.time);
  const std::vector<DifficultyRecord> records =
      read_difficulty_table(p.abs("difficulty.csv").string());
  std::map<AgentKey, const DifficultyRecord*> difficulty_by_key;
  for (const auto& r : records) difficulty_by_key[r.key] = &r;

  const GroupSchema ego_schema = vector_schema(Axis::kEgo);
  const GroupSchema social_schema = vector_schema(Axis::kSocial);
  const VectorRows ego = load_vectors(p.abs("vectors_ego.csv").string(), ego_schema.width);
  const VectorRows social = load_vectors(p.abs("vectors_social.csv").string(), social_schema.width);
  std::map<AgentKey, size_t> ego_row, social_row;
  for (size_t i = 0; i < ego.keys.size(); ++i) ego_row[ego.keys[i]] = i;
  for (size_t i = 0; i < social.keys.size(); ++i) social_row[social.keys[i]] = i;

  ExampleBundle bundle;
  for (const Scenario& scenario : corpus) {
    for (const std::string& focal_id : scenario.focal_ids) {
      const AgentKey key{scenario.scenario_id, focal_id};
      const auto assignment = manifest.assignment.find(key);
      if (assignment == manifest.assignment.end()) continue;
      const auto difficulty = difficulty_by_key.find(key);
      if (difficulty == difficulty_by_key.end() || difficulty->second->excluded) continue;

      const AgentTrack* focal = scenario.find_agent(focal_id);
      const AgentTrack interp = interpolate_history(*focal, *focal, c.time);
      const Pose pose = final_pose(interp, c.time);

      TrainingExample ex;
      ex.key = key;
      ex.input = build_scene_input(scenario, focal_id, c.time, c.features,
                                   c.predictor.k_neighbors);
      ex.gt_future.resize(c.time.t_fut, 2);
      ex.gt_future.setZero();
      ex.future_valid.assign(c.time.t_fut, 0);
      for (int t = 0; t < c.time.t_fut; ++t) {
        const AgentState& st = focal->states[c.time.t_hist + t];
        if (!st.valid) continue;
        const Vec2 rel = to_frame(st.position, pose);
        ex.gt_future(t, 0) = rel.x;
        ex.gt_future(t, 1) = rel.y;
        ex.future_valid[t] = 1;
      }
      ex.aux_target = Vector::Zero(3);
      ex.aux_valid.assign(3, 0);
      const auto& fde = difficulty->second->horizon_fde;
      for (size_t h = 0; h < fde.size() && h < 3; ++h) {
        if (fde[h]) {
          ex.aux_target(h) = *fde[h];
          ex.aux_valid[h] = 1;
        }
      }
      ex.difficulty = difficulty->second->difficulty;

      // Gating latents from the split-retrained autoencoders. Types without
      // a retrained model fall back to zero latents.
      ex.gating_input = Vector::Zero(2 * c.autoencoder.latent);
      const AgentType type = focal->agent_type;
      if (registry.has(Axis::kEgo, type) && registry.has(Axis::kSocial, type)) {
        const auto e_it = ego_row.find(key);
        const auto s_it = social_row.find(key);
        if (e_it != ego_row.end() && s_it != social_row.end()) {
          const Matrix ze = registry.get(Axis::kEgo, type).encode({ego.rows[e_it->second]});
          const Matrix zs = registry.get(Axis::kSocial, type).encode({social.rows[s_it->second]});
          ex.gating_input.head(c.autoencoder.latent) = ze.row(0).transpose();
          ex.gating_input.tail(c.autoencoder.latent) = zs.row(0).transpose();
        }
      }

      switch (assignment->second) {
        case SplitAssignment::kTrain: bundle.train.push_back(std::move(ex)); break;
        case SplitAssignment::kVal: bundle.val.push_back(std::move(ex)); break;
        case SplitAssignment::kTest: bundle.test.push_back(std::move(ex)); break;
      }
    }
  }
  return bundle;
}

ModelRegistry retrain_split_autoencoders(const PipelineConfig& c, const std::string& run_dir,
                                         const SplitManifest& manifest) {
  const StagePaths p{fs::path(run_dir)};
  const uint64_t manifest_hash = manifest.content_hash();
  ModelRegistry registry;
  for (const Axis axis : {Axis::kEgo, Axis::kSocial}) {
    const GroupSchema schema = vector_schema(axis);
    const VectorRows data = load_vectors(
        p.abs(axis == Axis::kEgo ? "vectors_ego.csv" : "vectors_social.csv").string(),
        schema.width);
    for (int ti = 0; ti < kNumAgentTypes; ++ti) {
      const AgentType type = static_cast<AgentType>(ti);
      std::vector<std::vector<double>> rows;
      for (size_t i = 0; i < data.rows.size(); ++i) {
        if (data.types[i] != type) continue;
        const auto it = manifest.assignment.find(data.keys[i]);
        if (it == manifest.assignment.end() || it->second != SplitAssignment::kTrain) continue;
        rows.push_back(data.rows[i]);
      }
      if (static_cast<int>(rows.size()) < c.autoencoder.min_samples) continue;
      const uint64_t seed = Rng::substream(
          c.seed, std::string("retrain_") + axis_name(axis) + "_" + agent_type_name(type));
      TrainedAutoencoder trained =
          train_autoencoder(rows, axis, type, schema, c.autoencoder, seed, manifest_hash);
      registry.add(std::move(trained.model));
    }
  }
  return registry;
}

namespace {

ModelRegistry load_train_registry(const StagePaths& p) {
  ModelRegistry registry;
  for (const Axis axis : {Axis::kEgo, Axis::kSocial}) {
    for (int ti = 0; ti < kNumAgentTypes; ++ti) {
      const AgentType type = static_cast<AgentType>(ti);
      const fs::path file = p.abs(ae_model_file("ae_train", axis, type));
      if (fs::exists(file)) registry.add(load_autoencoder(file.string()));
    }
  }
  return registry;
}

std::vector<std::string> run_train(const PipelineConfig& c, const StagePaths& p) {
  const SplitManifest manifest = load_manifest(p.abs("split.json").string());
  const uint64_t manifest_hash = manifest.content_hash();
  fs::create_directories(p.abs("models"));

  // Retrain the context autoencoders on the train assignment only; their
  // latents condition the gating network without touching test agents.
  const ModelRegistry registry = retrain_split_autoencoders(c, p.dir.string(), manifest);
  std::vector<std::string> outputs;
  for (const auto& [key, model] : registry.models()) {
    const std::string file = ae_model_file("ae_train", key.first, key.second);
    save_autoencoder(model, p.abs(file).string());
    outputs.push_back(file);
  }

  const ExampleBundle bundle = build_examples(c, p.dir.string(), manifest, registry);
  if (bundle.train.empty()) throw ValidationError("train: empty train split");
  if (bundle.val.empty()) throw ValidationError("train: empty val split");

  uint64_t ego_fp = 0, social_fp = 0;
  // Fingerprint the vehicle-type encoders when present (reference type for
  // the leakage check); fall back to any available type.
  for (int ti = 0; ti < kNumAgentTypes; ++ti) {
    const AgentType type = static_cast<AgentType>(ti);
    if (ego_fp == 0 && registry.has(Axis::kEgo, type)) {
      ego_fp = autoencoder_fingerprint(registry.get(Axis::kEgo, type));
    }
    if (social_fp == 0 && registry.has(Axis::kSocial, type)) {
      social_fp = autoencoder_fingerprint(registry.get(Axis::kSocial, type));
    }
  }

  for (const std::string& method : c.methods) {
    const PredictorConfig method_cfg = method_config(c.predictor, method);
    const uint64_t seed = Rng::substream(c.seed, "train_" + method);
    TrainedPredictor trained =
        train_predictor(bundle.train, bundle.val, method_cfg, c.time, seed);
    trained.model.manifest_hash = manifest_hash;
    trained.model.ego_encoder_fingerprint = ego_fp;
    trained.model.social_encoder_fingerprint = social_fp;
    const std::string file = "models/predictor_" + method + ".txt";
    save_predictor(trained.model, p.abs(file).string());
    outputs.push_back(file);

    CsvTable log;
    log.header = {"epoch", "train_loss", "val_brier_fde", "selected"};
    for (size_t e = 0; e < trained.log.size(); ++e) {
      log.rows.push_back({std::to_string(e), format_double(trained.log[e].train_loss),
                          format_double(trained.log[e].val_brier_fde),
                          e == static_cast<size_t>(trained.best_epoch) ? "1" : "0"});
    }
    const std::string log_file = "train_log_" + method + ".csv";
    write_csv(p.abs(log_file).string(), log);
    outputs.push_back(log_file);
  }
  return outputs;
}

AgentMetrics evaluate_example(const PredictorModel& model, const PredictorOutput& out, int i,
                              const TrainingExample& ex) {
  const int t_fut = model.time.t_fut;
  std::vector<Matrix> modes;
  for (int k = 0; k < model.config.modes; ++k) {
    Matrix traj(t_fut, 2);
    for (int t = 0; t < t_fut; ++t) {
      traj(t, 0) = out.trajectories[k](i, t * 2);
      traj(t, 1) = out.trajectories[k](i, t * 2 + 1);
    }
    modes.push_back(std::move(traj));
  }
  const ModeMetrics m =
      min_metrics(modes, out.confidences.row(i).transpose(), ex.gt_future, ex.future_valid);
  AgentMetrics am;
  am.scenario_id = ex.key.scenario_id;
  am.agent_id = ex.key.agent_id;
  am.ade = m.ade;
  am.fde = m.fde;
  am.brier_fde = m.brier_fde;
  am.difficulty = ex.difficulty;
  return am;
}

std::vector<AgentMetrics> evaluate_population(const PredictorModel& model,
                                              const std::vector<TrainingExample>& examples,
                                              bool use_tmn, CsvTable* predictions) {
  std::vector<AgentMetrics> metrics;
  const int chunk = 256;
  for (size_t start = 0; start < examples.size(); start += chunk) {
    const int b = static_cast<int>(std::min<size_t>(chunk, examples.size() - start));
    Matrix inputs(b, model.input_width);
    Matrix gating(b, 2 * model.config.latent);
    gating.setZero();
    for (int i = 0; i < b; ++i) {
      inputs.row(i) = examples[start + i].input.transpose();
      if (use_tmn) gating.row(i) = examples[start + i].gating_input.transpose();
    }
    const PredictorOutput out = predictor_forward(model, inputs, gating, use_tmn);
    for (int i = 0; i < b; ++i) {
      const TrainingExample& ex = examples[start + i];
      bool any_valid = false;
      for (const auto v : ex.future_valid) any_valid = any_valid || v;
      if (!any_valid) continue;
      metrics.push_back(evaluate_example(model, out, i, ex));
      if (predictions != nullptr) {
        for (int k = 0; k < model.config.modes; ++k) {
          for (int t = 0; t < model.time.t_fut; ++t) {
            predictions->rows.push_back(
                {ex.key.scenario_id, ex.key.agent_id, std::to_string(k), std::to_string(t),
                 format_double(out.trajectories[k](i, t * 2)),
                 format_double(out.trajectories[k](i, t * 2 + 1)),
                 format_double(out.confidences(i, k)), format_double(out.aux(i, 0)),
                 format_double(out.aux(i, 1)), format_double(out.aux(i, 2))});
          }
        }
      }
    }
  }
  return metrics;
}

std::vector<std::string> run_eval(const PipelineConfig& c, const StagePaths& p) {
  const SplitManifest manifest = load_manifest(p.abs("split.json").string());
  const uint64_t manifest_hash = manifest.content_hash();
  const ModelRegistry registry = load_train_registry(p);
  const ExampleBundle bundle = build_examples(c, p.dir.string(), manifest, registry);

  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, std::pair<StratifiedRow, StratifiedRow>>> method_rows;
  CsvTable bins;
  bins.header = {"setting", "method", "population", "bin",    "bin_lo", "bin_hi",
                 "count",   "ade",    "fde",        "brier_fde"};
  auto append_bins = [&bins, &c](const std::string& method, const StratifiedRow& row) {
    for (size_t b = 0; b < row.bin_counts.size(); ++b) {
      const double lo = b == 0 ? 0.0 : row.bin_edges[b - 1];
      const std::string hi =
          b < row.bin_edges.size() ? format_double(row.bin_edges[b]) : "inf";
      bins.rows.push_back({split_setting_name(c.split.setting), method, row.population,
                           std::to_string(b), format_double(lo), hi,
                           std::to_string(row.bin_counts[b]), format_double(row.bin_ade[b]),
                           format_double(row.bin_fde[b]), format_double(row.bin_brier[b])});
    }
  };
  for (const std::string& method : c.methods) {
    const std::string model_file = "models/predictor_" + method + ".txt";
    PredictorModel model = load_predictor(p.abs(model_file).string());
    if (model.manifest_hash != manifest_hash) {
      throw ValidationError("eval: checkpoint " + model_file +
                            " was trained against a different split manifest");
    }
    // Leakage guard: gating latents must come from autoencoders fitted on
    // this split's train set only.
    for (int ti = 0; ti < kNumAgentTypes; ++ti) {
      const AgentType type = static_cast<AgentType>(ti);
      for (const Axis axis : {Axis::kEgo, Axis::kSocial}) {
        if (!registry.has(axis, type)) continue;
        if (registry.get(axis, type).split_hash != manifest_hash) {
          throw ValidationError("eval: retrained autoencoder split hash mismatch");
        }
      }
    }
    const bool use_tmn = model.config.use_tmn;

    CsvTable predictions;
    predictions.header = {"scenario_id", "agent_id", "mode", "step", "x", "y",
                          "confidence", "aux_0", "aux_1", "aux_2"};
    const std::vector<AgentMetrics> seen_metrics =
        evaluate_population(model, bundle.val, use_tmn, nullptr);
    const std::vector<AgentMetrics> unseen_metrics =
        evaluate_population(model, bundle.test, use_tmn, &predictions);

    const StratifiedRow seen = stratified_report(seen_metrics, c.eval.bins, "seen");
    const StratifiedRow unseen = stratified_report(unseen_metrics, c.eval.bins, "unseen");
    append_bins(method, seen);
    append_bins(method, unseen);
    method_rows.push_back({method, {seen, unseen}});

    const std::string pred_file = "predictions_" + method + ".csv";
    write_csv(p.abs(pred_file).string(), predictions);
    outputs.push_back(pred_file);
  }
  write_csv(p.abs("report_bins.csv").string(), bins);
  outputs.push_back("report_bins.csv");

  const std::string reference =
      std::find(c.methods.begin(), c.methods.end(), "baseline") != c.methods.end() ? "baseline"
                                                                                   : c.methods[0];
  const GapTable table = gap_report(method_rows, split_setting_name(c.split.setting), reference);
  write_gap_csv(table, p.abs("report.csv").string());
  std::ofstream txt(p.abs("report.txt"));
  txt << render_gap_table(table);
  txt.close();
  outputs.push_back("report.csv");
  outputs.push_back("report.txt");
  return outputs;
}

}  // namespace

std::vector<AgentMetrics> evaluate_examples(const PredictorModel& model,
                                            const std::vector<TrainingExample>& examples,
                                            bool use_tmn) {
  return evaluate_population(model, examples, use_tmn, nullptr);
}

GapTable evaluate_checkpoint(const PipelineConfig& config, const std::string& manifest_path,
                             const std::string& checkpoint_path) {
  const SplitManifest manifest = load_manifest(manifest_path);
  const uint64_t manifest_hash = manifest.content_hash();
  PredictorModel model = load_predictor(checkpoint_path);
  if (model.manifest_hash != manifest_hash) {
    throw ValidationError("evaluate_checkpoint: checkpoint was trained against a different split");
  }
  StagePaths p{fs::path(config.out_dir)};
  const ModelRegistry registry = load_train_registry(p);
  for (const auto& [key, ae] : registry.models()) {
    if (ae.split_hash != manifest_hash) {
      throw ValidationError("evaluate_checkpoint: retrained autoencoder split hash mismatch");
    }
  }
  const ExampleBundle bundle = build_examples(config, config.out_dir, manifest, registry);
  const StratifiedRow seen = stratified_report(
      evaluate_examples(model, bundle.val, model.config.use_tmn), config.eval.bins, "seen");
  const StratifiedRow unseen = stratified_report(
      evaluate_examples(model, bundle.test, model.config.use_tmn), config.eval.bins, "unseen");
  std::vector<std::pair<std::string, std::pair<StratifiedRow, StratifiedRow>>> rows;
  rows.push_back({fs::path(checkpoint_path).stem().string(), {seen, unseen}});
  return gap_report(rows, split_setting_name(manifest.setting), rows[0].first);
}

PredictorConfig method_config(const PredictorConfig& base, const std::string& method) {
  PredictorConfig cfg = base;
  if (method == "baseline") {
    cfg.use_tmn = false;
    cfg.use_aux = false;
  } else if (method == "tmn") {
    cfg.use_tmn = true;
    cfg.use_aux = false;
  } else if (method == "aux") {
    cfg.use_tmn = false;
    cfg.use_aux = true;
  } else if (method == "both") {
    cfg.use_tmn = true;
    cfg.use_aux = true;
  } else {
    throw ValidationError("unknown method '" + method + "'");
  }
  return cfg;
}

StageStatus run_stage(Stage stage, const PipelineConfig& config) {
  StagePaths p;
  p.dir = config.out_dir;
  fs::create_directories(p.dir);
  const std::string manifest_path = (p.dir / "manifest.json").string();
  RunManifest manifest = load_run_manifest(manifest_path);
  write_resolved_config(config, (p.dir / "resolved_config.json").string());

  // Upstream freshness: configs unchanged and artifacts hash-matching.
  for (const Stage dep : stage_deps(stage)) {
    const auto it = manifest.stages.find(stage_name(dep));
    if (it == manifest.stages.end()) {
      throw StalenessError(std::string("stage '") + stage_name(stage) + "' needs stage '" +
                           stage_name(dep) + "' to run first");
    }
    if (it->second.config_hash != stage_config_digest(dep, config)) {
      throw StalenessError(std::string("stage '") + stage_name(dep) +
                           "' is stale (config changed); rerun it");
    }
    for (const auto& [file, recorded] : it->second.outputs) {
      const fs::path path = p.dir / file;
      if (!fs::exists(path) || hash_hex(hash_file(path.string())) != recorded) {
        throw StalenessError(std::string("artifact '") + file + "' is stale; rerun stage '" +
                             stage_name(dep) + "'");
      }
    }
  }

  // Collect this stage's input hashes from its dependencies.
  std::map<std::string, std::string> input_hashes;
  for (const Stage dep : stage_deps(stage)) {
    for (const auto& [file, hash] : manifest.stages[stage_name(dep)].outputs) {
      input_hashes[file] = hash;
    }
  }

  const std::string config_hash = stage_config_digest(stage, config);
  const auto existing = manifest.stages.find(stage_name(stage));
  if (existing != manifest.stages.end() && existing->second.config_hash == config_hash &&
      existing->second.inputs == input_hashes) {
    bool outputs_ok = !existing->second.outputs.empty();
    for (const auto& [file, recorded] : existing->second.outputs) {
      const fs::path path = p.dir / file;
      if (!fs::exists(path) || hash_hex(hash_file(path.string())) != recorded) {
        outputs_ok = false;
        break;
      }
    }
    if (outputs_ok) return StageStatus::kUpToDate;
  }

  std::vector<std::string> outputs;
  switch (stage) {
    case Stage::kSynth: outputs = run_synth(config, p); break;
    case Stage::kExtract: outputs = run_extract(config, p); break;
    case Stage::kVectorize: outputs = run_vectorize(config, p); break;
    case Stage::kAutoencode: outputs = run_autoencode(config, p); break;
    case Stage::kCluster: outputs = run_cluster(config, p); break;
    case Stage::kDifficulty: outputs = run_difficulty(config, p); break;
    case Stage::kSplit: outputs = run_split(config, p); break;
    case Stage::kTrain: outputs = run_train(config, p); break;
    case Stage::kEval: outputs = run_eval(config, p); break;
  }

  StageEntry entry;
  entry.config_hash = config_hash;
  entry.inputs = input_hashes;
  entry.seed = config.seed;
  for (const std::string& file : outputs) {
    entry.outputs[file] = hash_hex(hash_file((p.dir / file).string()));
  }
  manifest.stages[stage_name(stage)] = std::move(entry);
  save_run_manifest(manifest, manifest_path);
  return StageStatus::kRan;
}

std::string compare_runs(const std::string& dir_a, const std::string& dir_b) {
  const auto check = [](const std::string& dir) {
    const RunManifest m = load_run_manifest((fs::path(dir) / "manifest.json").string());
    if (m.stages.count("eval") == 0) {
      throw ValidationError("compare: run '" + dir + "' has not completed eval");
    }
  };
  check(dir_a);
  check(dir_b);

  const GapTable a = read_gap_csv((fs::path(dir_a) / "report.csv").string());
  const GapTable b = read_gap_csv((fs::path(dir_b) / "report.csv").string());
  if (a.rows.empty() || b.rows.empty()) throw ValidationError("compare: empty reports");
  if (a.rows[0].setting != b.rows[0].setting) {
    throw ValidationError("compare: runs use different split settings (" + a.rows[0].setting +
                          " vs " + b.rows[0].setting + ")");
  }

  std::ostringstream os;
  os << "setting: " << a.rows[0].setting << "\n";
  os << "run A: " << dir_a << "\nrun B: " << dir_b << "\n\n";
  for (const auto& row_a : a.rows) {
    const GapRow* row_b = nullptr;
    for (const auto& rb : b.rows) {
      if (rb.method == row_a.method) row_b = &rb;
    }
    os << row_a.method << ":\n";
    if (row_b == nullptr) {
      os << "  only in run A\n";
      continue;
    }
    const auto line = [&os](const char* name, const GapCell& ca, const GapCell& cb) {
      os << "  " << name << ": " << ca.value << " -> " << cb.value << " (delta "
         << cb.value - ca.value << ")\n";
    };
    line("seen ADE", row_a.seen_ade, row_b->seen_ade);
    line("seen FDE", row_a.seen_fde, row_b->seen_fde);
    line("seen Brier-FDE", row_a.seen_brier, row_b->seen_brier);
    line("unseen ADE", row_a.unseen_ade, row_b->unseen_ade);
    line("unseen FDE", row_a.unseen_fde, row_b->unseen_fde);
    line("unseen Brier-FDE", row_a.unseen_brier, row_b->unseen_brier);
  }
  for (const auto& row_b : b.rows) {
    bool found = false;
    for (const auto& ra : a.rows) found = found || ra.method == row_b.method;
    if (!found) os << row_b.method << ":\n  only in run B\n";
  }
  return os.str();
}

}  // namespace ctxbench
