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

#include "ctxbench/errors.hpp"
#include "ctxbench/vectorize.hpp"

using namespace ctxbench;

TEST_CASE("summarize_series on a constant series") {
  const auto s = summarize_series({2.0, 2.0, 2.0}, 0.1);
  CHECK(s[0] == 2.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 2.0);
  CHECK(s[3] == 2.0);
  CHECK(s[4] == 0.0);
}

TEST_CASE("summarize_series hand-computed values") {
  // mean 1, population std sqrt(2/3), slope (2-0)/(2*0.1) = 10.
  const auto s = summarize_series({0.0, 1.0, 2.0}, 0.1);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s[1] == doctest::Approx(0.8165).epsilon(1e-4));
  CHECK(s[2] == 0.0);
  CHECK(s[3] == 2.0);
  CHECK(s[4] == doctest::Approx(10.0));
}

TEST_CASE("summarize_series degenerate length-1 rule") {
  const auto s = summarize_series({5.0}, 0.1);
  CHECK(s[0] == 5.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 5.0);
  CHECK(s[3] == 5.0);
  CHECK(s[4] == 0.0);
}

TEST_CASE("summarize_series rejects an empty series") {
  CHECK_THROWS_AS(summarize_series({}, 0.1), ContractError);
}

TEST_CASE("ego schema has ten groups in the documented order") {
  const GroupSchema schema = vector_schema(Axis::kEgo);
  REQUIRE(schema.groups.size() == 10);
  CHECK(schema.groups[0].name == "kinematics");
  CHECK(schema.groups[1].name == "lane");
  // 4 closest + 4 forward traffic control device groups.
  int closest = 0, forward = 0;
  for (const auto& g : schema.groups) {
    if (g.name.rfind("tcd_closest.", 0) == 0) ++closest;
    if (g.name.rfind("tcd_forward.", 0) == 0) ++forward;
  }
  CHECK(closest == 4);
  CHECK(forward == 4);
  CHECK(schema.width == static_cast<int>(schema.dim_names.size()));
  CHECK(schema.valid_bit_indices.size() == 10);
}

TEST_CASE("social schema has one global group plus nine geometry slots") {
  const GroupSchema schema = vector_schema(Axis::kSocial);
  REQUIRE(schema.groups.size() == 10);
  CHECK(schema.groups[0].name == "global");
  for (int leaf = 0; leaf < 9; ++leaf) {
    CHECK(schema.groups[1 + leaf].name.rfind("slot.", 0) == 0);
  }
}

TEST_CASE("schema hash is stable across calls and differs across axes") {
  CHECK(vector_schema(Axis::kEgo).hash == vector_schema(Axis::kEgo).hash);
  CHECK(vector_schema(Axis::kSocial).hash == vector_schema(Axis::kSocial).hash);
  CHECK(vector_schema(Axis::kEgo).hash != vector_schema(Axis::kSocial).hash);
}

namespace {

EgoFeatureSet tiny_ego_features() {
  EgoFeatureSet fs;
  fs.kinematics.span_start = 0;
  fs.kinematics.px = {0.0, 1.0, 2.0};
  fs.kinematics.py = {0.0, 0.0, 0.0};
  fs.kinematics.vx = {10.0, 10.0, 10.0};
  fs.kinematics.vy = {0.0, 0.0, 0.0};
  fs.kinematics.ax = {0.0, 0.0, 0.0};
  fs.kinematics.ay = {0.0, 0.0, 0.0};
  fs.kinematics.curvature = {0.0, 0.0, 0.0};
  TcdProximity sign;
  sign.kind = MapKind::kStopSign;
  sign.distance = 5.0;
  sign.relative_heading = 0.25;
  sign.is_forward = true;
  fs.tcd_closest[1] = sign;
  return fs;
}

}  // namespace

TEST_CASE("absent groups are exactly zero with a zero valid bit") {
  const GroupSchema schema = vector_schema(Axis::kEgo);
  const FeatureVector v = build_vector(tiny_ego_features(), schema, 0.1);
  REQUIRE(static_cast<int>(v.values.size()) == schema.width);

  // Group layout bookkeeping: locate each group's [start, end) range.
  int at = 0;
  for (size_t g = 0; g < schema.groups.size(); ++g) {
    const int width = static_cast<int>(schema.groups[g].dims.size());
    const int bit = schema.valid_bit_indices[g];
    CHECK(bit == at + width);
    const bool present = v.values[bit] == 1.0;
    if (!present) {
      for (int i = at; i < at + width; ++i) CHECK(v.values[i] == 0.0);
    }
    at = bit + 1;
  }
  // lane group absent, stop-sign closest group present.
  CHECK(v.values[schema.valid_bit_indices[1]] == 0.0);
  CHECK(v.values[schema.valid_bit_indices[3]] == 1.0);
}

TEST_CASE("build_vector matches a hand-assembled golden vector") {
  const GroupSchema schema = vector_schema(Axis::kEgo);
  const FeatureVector v = build_vector(tiny_ego_features(), schema, 0.1);

  // Hand-assembled expectation for the kinematics group: five stats per
  // series in schema order, then the valid bit.
  const std::vector<double> expected_px = {1.0, std::sqrt(2.0 / 3.0), 0.0, 2.0, 10.0};
  for (int i = 0; i < 5; ++i) CHECK(v.values[i] == doctest::Approx(expected_px[i]).epsilon(1e-12));
  const std::vector<double> expected_vx = {10.0, 0.0, 10.0, 10.0, 0.0};
  for (int i = 0; i < 5; ++i) {
    CHECK(v.values[10 + i] == doctest::Approx(expected_vx[i]).epsilon(1e-12));
  }
  CHECK(v.values[schema.valid_bit_indices[0]] == 1.0);

  // Stop-sign closest group: distance, relative heading, forward flag, bit.
  int at = 0;
  for (int g = 0; g < 3; ++g) at = schema.valid_bit_indices[g] + 1;
  CHECK(v.values[at + 0] == 5.0);
  CHECK(v.values[at + 1] == 0.25);
  CHECK(v.values[at + 2] == 1.0);
  CHECK(v.values[at + 3] == 1.0);
}

TEST_CASE("build_vector is deterministic") {
  const GroupSchema schema = vector_schema(Axis::kEgo);
  const FeatureVector a = build_vector(tiny_ego_features(), schema, 0.1);
  const FeatureVector b = build_vector(tiny_ego_features(), schema, 0.1);
  CHECK(a.values == b.values);
  CHECK(a.schema_hash == schema.hash);
}

TEST_CASE("setting a group absent never changes other groups") {
  const GroupSchema schema = vector_schema(Axis::kEgo);
  EgoFeatureSet with = tiny_ego_features();
  EgoFeatureSet without = tiny_ego_features();
  without.tcd_closest[1] = std::nullopt;
  const FeatureVector a = build_vector(with, schema, 0.1);
  const FeatureVector b = build_vector(without, schema, 0.1);
  // The stop-sign closest group occupies indices [start, bit]; all other
  // entries must be identical.
  int start = 0;
  for (int g = 0; g < 3; ++g) start = schema.valid_bit_indices[g] + 1;
  const int end = schema.valid_bit_indices[3];
  for (int i = 0; i < schema.width; ++i) {
    if (i >= start && i <= end) continue;
    CHECK(a.values[i] == b.values[i]);
  }
}

TEST_CASE("social vector length is invariant across feature sets") {
  const GroupSchema schema = vector_schema(Axis::kSocial);
  InteractionFeatureSet empty;
  const FeatureVector a = build_vector(empty, schema, 0.1);
  InteractionFeatureSet one;
  one.density = 3;
  InteractionSlot slot;
  slot.agent_id = "x";
  slot.other_type = AgentType::kCyclist;
  slot.distance = 12.0;
  slot.rel_final.px = {1.0, 2.0};
  slot.rel_final.py = {0.0, 0.0};
  slot.rel_final.vx = {1.0, 1.0};
  slot.rel_final.vy = {0.0, 0.0};
  slot.rel_final.ax = {0.0, 0.0};
  slot.rel_final.ay = {0.0, 0.0};
  slot.per_pose_px = {1.0, 2.0};
  slot.per_pose_py = {0.0, 0.0};
  slot.per_pose_vx = {1.0, 1.0};
  slot.per_pose_vy = {0.0, 0.0};
  slot.closing_speed = {0.5, 0.5};
  one.slots[4] = slot;
  const FeatureVector b = build_vector(one, schema, 0.1);
  CHECK(a.values.size() == b.values.size());
  CHECK(static_cast<int>(a.values.size()) == schema.width);
  // Empty delta_ttcp series inside a present group zero-fills its block.
  CHECK(b.values[schema.valid_bit_indices[5]] == 1.0);
}

TEST_CASE("standardizer centers train rows and exempts valid bits") {
  Standardizer st;
  st.fit({{1.0, 10.0, 1.0}, {3.0, 20.0, 0.0}}, {2});
  const std::vector<double> z = st.apply({2.0, 15.0, 1.0});
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[1] == doctest::Approx(0.0));
  CHECK(z[2] == 1.0);  // exempt dimension passes through
  const std::vector<double> z2 = st.apply({3.0, 20.0, 0.0});
  CHECK(z2[0] == doctest::Approx(1.0));
}
