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

#include "ctxbench/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctxbench/errors.hpp"
#include "ctxbench/csv.hpp"
#include "ctxbench/hashing.hpp"

namespace ctxbench {

namespace {

constexpr const char* kSchemaVersion = "v1";
const char* kStatNames[] = {"mean", "std", "min", "max", "slope"};

void add_series_dims(SchemaGroup* g, const std::string& base) {
  for (const char* stat : kStatNames) g->dims.push_back(base + "." + stat);
}

void finalize_schema(GroupSchema* schema) {
  std::string digest = std::string(kSchemaVersion) + "|" + axis_name(schema->axis);
  for (const auto& g : schema->groups) {
    for (const auto& d : g.dims) {
      schema->dim_names.push_back(g.name + "." + d);
      digest += "|" + schema->dim_names.back();
    }
    schema->valid_bit_indices.push_back(static_cast<int>(schema->dim_names.size()));
    schema->dim_names.push_back(g.name + ".valid");
    digest += "|" + schema->dim_names.back();
  }
  schema->width = static_cast<int>(schema->dim_names.size());
  schema->version = kSchemaVersion;
  schema->hash = fnv1a64(digest);
}

class VectorBuilder {
 public:
  explicit VectorBuilder(const GroupSchema& schema) : schema_(schema) {
    vec_.axis = schema.axis;
    vec_.schema_hash = schema.hash;
    vec_.values.reserve(schema.width);
  }

  void series(const std::vector<double>& s, double dt) {
    if (s.empty()) {
      for (int i = 0; i < 5; ++i) vec_.values.push_back(0.0);
      return;
    }
    const auto stats = summarize_series(s, dt);
    for (const double v : stats) vec_.values.push_back(v);
  }

  void scalar(double v) { vec_.values.push_back(v); }

  void group_end(bool present) { vec_.values.push_back(present ? 1.0 : 0.0); }

  void absent_group(size_t group_index) {
    const size_t n = schema_.groups[group_index].dims.size();
    for (size_t i = 0; i < n; ++i) vec_.values.push_back(0.0);
    group_end(false);
  }

  FeatureVector finish() {
    if (static_cast<int>(vec_.values.size()) != schema_.width) {
      throw ContractError("build_vector: layout mismatch (" + std::to_string(vec_.values.size()) +
                          " values, schema width " + std::to_string(schema_.width) + ")");
    }
    return std::move(vec_);
  }

 private:
  const GroupSchema& schema_;
  FeatureVector vec_;
};

}  // namespace

const char* axis_name(Axis axis) { return axis == Axis::kEgo ? "ego" : "social"; }

std::array<double, 5> summarize_series(const std::vector<double>& series, double dt) {
  if (series.empty()) throw ContractError("summarize_series: empty series");
  const size_t n = series.size();
  double sum = 0.0, lo = series[0], hi = series[0];
  for (const double v : series) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (const double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population variance, defined for n == 1
  const double slope =
      n > 1 ? (series.back() - series.front()) / (static_cast<double>(n - 1) * dt) : 0.0;
  return {mean, std::sqrt(var), lo, hi, slope};
}

GroupSchema vector_schema(Axis axis) {
  GroupSchema schema;
  schema.axis = axis;
  if (axis == Axis::kEgo) {
    SchemaGroup kin{"kinematics", {}};
    for (const char* base : {"rel_px", "rel_py", "rel_vx", "rel_vy", "rel_ax", "rel_ay", "curvature"}) {
      add_series_dims(&kin, base);
    }
    schema.groups.push_back(std::move(kin));

    SchemaGroup lane{"lane", {}};
    lane.dims.push_back("lane_type.lane");
    lane.dims.push_back("heading_diff");
    lane.dims.push_back("lateral_offset");
    for (const char* base : {"frenet_s", "frenet_d", "compliance"}) add_series_dims(&lane, base);
    schema.groups.push_back(std::move(lane));

    for (int k = 0; k < kNumTcdKinds; ++k) {
      SchemaGroup g{std::string("tcd_closest.") + map_kind_name(kTcdKinds[k]), {}};
      g.dims = {"distance", "relative_heading", "is_forward"};
      schema.groups.push_back(std::move(g));
    }
    for (int k = 0; k < kNumTcdKinds; ++k) {
      SchemaGroup g{std::string("tcd_forward.") + map_kind_name(kTcdKinds[k]), {}};
      g.dims = {"distance", "relative_heading"};
      schema.groups.push_back(std::move(g));
    }
  } else {
    SchemaGroup global{"global", {"density"}};
    schema.groups.push_back(std::move(global));
    for (int leaf = 0; leaf < kNumGeometryLeaves; ++leaf) {
      SchemaGroup g{"slot." + geometry_leaf_name(leaf), {}};
      g.dims = {"type.vehicle", "type.pedestrian", "type.cyclist"};
      for (const char* base : {"rel_px", "rel_py", "rel_vx", "rel_vy", "rel_ax", "rel_ay"}) {
        add_series_dims(&g, std::string("final.") + base);
      }
      for (const char* base : {"rel_px", "rel_py", "rel_vx", "rel_vy"}) {
        add_series_dims(&g, std::string("per_pose.") + base);
      }
      add_series_dims(&g, "closing_speed");
      add_series_dims(&g, "delta_ttcp");
      for (const char* name : {"conflict.exists", "conflict.distance", "conflict.rel_x",
                               "conflict.rel_y", "conflict.bearing", "conflict.delta_ttcp"}) {
        g.dims.push_back(name);
      }
      schema.groups.push_back(std::move(g));
    }
  }
  finalize_schema(&schema);
  return schema;
}

FeatureVector build_vector(const EgoFeatureSet& features, const GroupSchema& schema, double dt) {
  if (schema.axis != Axis::kEgo) throw ContractError("build_vector: ego features need the ego schema");
  VectorBuilder b(schema);

  if (features.kinematics.size() > 0) {
    const auto& k = features.kinematics;
    for (const auto* s : {&k.px, &k.py, &k.vx, &k.vy, &k.ax, &k.ay, &k.curvature}) b.series(*s, dt);
    b.group_end(true);
  } else {
    b.absent_group(0);
  }

  if (features.lane) {
    const auto& lane = *features.lane;
    b.scalar(1.0);  // single lane type in this map format
    b.scalar(lane.heading_diff);
    b.scalar(lane.lateral_offset);
    b.series(lane.frenet_s, dt);
    b.series(lane.frenet_d, dt);
    b.series(lane.compliance, dt);
    b.group_end(true);
  } else {
    b.absent_group(1);
  }

  for (int k = 0; k < kNumTcdKinds; ++k) {
    if (features.tcd_closest[k]) {
      b.scalar(features.tcd_closest[k]->distance);
      b.scalar(features.tcd_closest[k]->relative_heading);
      b.scalar(features.tcd_closest[k]->is_forward ? 1.0 : 0.0);
      b.group_end(true);
    } else {
      b.absent_group(2 + k);
    }
  }
  for (int k = 0; k < kNumTcdKinds; ++k) {
    if (features.tcd_forward[k]) {
      b.scalar(features.tcd_forward[k]->distance);
      b.scalar(features.tcd_forward[k]->relative_heading);
      b.group_end(true);
    } else {
      b.absent_group(2 + kNumTcdKinds + k);
    }
  }
  return b.finish();
}

FeatureVector build_vector(const InteractionFeatureSet& features, const GroupSchema& schema,
                           double dt) {
  if (schema.axis != Axis::kSocial) {
    throw ContractError("build_vector: interaction features need the social schema");
  }
  VectorBuilder b(schema);
  b.scalar(static_cast<double>(features.density));
  b.group_end(true);

  for (int leaf = 0; leaf < kNumGeometryLeaves; ++leaf) {
    const auto& slot = features.slots[leaf];
    if (!slot) {
      b.absent_group(1 + leaf);
      continue;
    }
    for (int t = 0; t < kNumAgentTypes; ++t) {
      b.scalar(slot->other_type == static_cast<AgentType>(t) ? 1.0 : 0.0);
    }
    const auto& rf = slot->rel_final;
    for (const auto* s : {&rf.px, &rf.py, &rf.vx, &rf.vy, &rf.ax, &rf.ay}) b.series(*s, dt);
    for (const auto* s : {&slot->per_pose_px, &slot->per_pose_py, &slot->per_pose_vx, &slot->per_pose_vy}) {
      b.series(*s, dt);
    }
    b.series(slot->closing_speed, dt);
    b.series(slot->delta_ttcp_series, dt);
    b.scalar(slot->conflict.exists ? 1.0 : 0.0);
    b.scalar(slot->conflict.distance);
    b.scalar(slot->conflict.relative_position.x);
    b.scalar(slot->conflict.relative_position.y);
    b.scalar(slot->conflict.bearing);
    b.scalar(slot->conflict.delta_ttcp);
    b.group_end(true);
  }
  return b.finish();
}

void write_schema_manifest(const GroupSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open schema manifest for writing: " + path);
  out << "axis " << axis_name(schema.axis) << '\n';
  out << "version " << schema.version << '\n';
  out << "width " << schema.width << '\n';
  out << "hash " << hash_hex(schema.hash) << '\n';
  for (size_t i = 0; i < schema.dim_names.size(); ++i) {
    out << i << ' ' << schema.dim_names[i] << '\n';
  }
}

void Standardizer::fit(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& exempt_dims) {
  if (rows.empty()) throw ContractError("standardizer: no rows to fit");
  const size_t d = rows[0].size();
  mean.assign(d, 0.0);
  stddev.assign(d, 1.0);
  exempt.assign(d, 0);
  for (const int i : exempt_dims) exempt[static_cast<size_t>(i)] = 1;
  for (const auto& row : rows) {
    for (size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  std::vector<double> var(d, 0.0);
  for (const auto& row : rows) {
    for (size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean[j];
      var[j] += c * c;
    }
  }
  for (size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
    stddev[j] = sd > 1e-12 ? sd : 1.0;
    if (exempt[j]) {
      mean[j] = 0.0;
      stddev[j] = 1.0;
    }
  }
}

std::vector<double> Standardizer::apply(const std::vector<double>& v) const {
  if (v.size() != mean.size()) throw ContractError("standardizer: width mismatch");
  std::vector<double> out(v.size());
  for (size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - mean[j]) / stddev[j];
  return out;
}

}  // namespace ctxbench
