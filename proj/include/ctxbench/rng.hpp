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

#ifndef CTXBENCH_RNG_HPP_
#define CTXBENCH_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace ctxbench {

// Deterministic random source. All sampling is implemented on top of the raw
// mt19937_64 stream so that results are bit-identical across standard library
// implementations (std distributions make no such guarantee).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller with a cached spare draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i)));
      std::swap(v[i], v[j]);
    }
  }

  // Derives an independent stream seed for a named pipeline stage so stages
  // can be rerun in isolation without perturbing each other.
  static uint64_t substream(uint64_t root, std::string_view name) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (const char c : name) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ull;
    }
    return splitmix(root ^ h);
  }

  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ctxbench

#endif  // CTXBENCH_RNG_HPP_
