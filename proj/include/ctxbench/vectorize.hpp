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

#ifndef CTXBENCH_VECTORIZE_HPP_
#define CTXBENCH_VECTORIZE_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctxbench/ego_features.hpp"
#include "ctxbench/social_features.hpp"

namespace ctxbench {

enum class Axis { kEgo = 0, kSocial = 1 };
const char* axis_name(Axis axis);

// (mean, population std, min, max, average slope). The slope is
// endpoint-to-endpoint over (len-1)*dt and zero for length-1 series.
std::array<double, 5> summarize_series(const std::vector<double>& series, double dt);

struct SchemaGroup {
  std::string name;
  std::vector<std::string> dims;  // scalar names, excluding the trailing valid bit
};

struct GroupSchema {
  Axis axis = Axis::kEgo;
  std::string version;
  std::vector<SchemaGroup> groups;
  std::vector<std::string> dim_names;      // full flattened layout incl. valid bits
  std::vector<int> valid_bit_indices;      // one per group
  int width = 0;
  uint64_t hash = 0;
};

// Deterministic fixed layout for an axis. Every dimension is named; the
// schema hash covers the version string and the full layout.
GroupSchema vector_schema(Axis axis);

struct FeatureVector {
  Axis axis = Axis::kEgo;
  std::vector<double> values;
  uint64_t schema_hash = 0;
};

// Group encoding: one-hot categoricals, five summary statistics per series,
// static scalars verbatim, then the group valid bit. Absent groups (and
// empty series inside a present group) are exactly zero-filled.
FeatureVector build_vector(const EgoFeatureSet& features, const GroupSchema& schema, double dt);
FeatureVector build_vector(const InteractionFeatureSet& features, const GroupSchema& schema,
                           double dt);

void write_schema_manifest(const GroupSchema& schema, const std::string& path);

// Per-dimension z-scoring fitted on training rows; exempt dimensions (valid
// bits) pass through untouched. Zero-variance dimensions divide by 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<uint8_t> exempt;

  void fit(const std::vector<std::vector<double>>& rows, const std::vector<int>& exempt_dims);
  std::vector<double> apply(const std::vector<double>& v) const;
};

}  // namespace ctxbench

#endif  // CTXBENCH_VECTORIZE_HPP_
