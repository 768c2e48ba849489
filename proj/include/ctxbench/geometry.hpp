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

#ifndef CTXBENCH_GEOMETRY_HPP_
#define CTXBENCH_GEOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace ctxbench {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  // z-component of the 2D cross product; positive when `o` is to the left.
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Maps any angle to (-pi, pi]. Values already in range pass through exactly.
inline double normalize_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians in (-pi, pi]
};

// Expresses a world point in the pose frame (origin at pose.position,
// x-axis along pose.heading, y-axis to the left).
inline Vec2 to_frame(const Vec2& point, const Pose& frame) {
  return rotate(point - frame.position, -frame.heading);
}

// Rotates a world-frame direction (velocity, acceleration) into the pose frame.
inline Vec2 rotate_into(const Vec2& v, const Pose& frame) {
  return rotate(v, -frame.heading);
}

inline Vec2 from_frame(const Vec2& local, const Pose& frame) {
  return rotate(local, frame.heading) + frame.position;
}

struct SegmentProjection {
  double t = 0.0;       // clamped parameter along the segment in [0, 1]
  Vec2 point;           // foot of the (clamped) projection
  double distance = 0.0;
};

inline SegmentProjection project_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  SegmentProjection out;
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  out.t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  out.point = a + ab * out.t;
  out.distance = (p - out.point).norm();
  return out;
}

// Minimum distance from a point to an open polyline (a single point counts
// as a degenerate polyline). Also reports the nearest point on it.
inline SegmentProjection project_on_polyline(const Vec2& p, const std::vector<Vec2>& pts) {
  SegmentProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (pts.size() == 1) {
    best.point = pts[0];
    best.distance = (p - pts[0]).norm();
    return best;
  }
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    SegmentProjection cand = project_on_segment(p, pts[i], pts[i + 1]);
    if (cand.distance < best.distance) best = cand;
  }
  return best;
}

}  // namespace ctxbench

#endif  // CTXBENCH_GEOMETRY_HPP_
