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

#ifndef CTXBENCH_HASHING_HPP_
#define CTXBENCH_HASHING_HPP_

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "ctxbench/errors.hpp"

namespace ctxbench {

inline uint64_t fnv1a64(std::string_view data, uint64_t h = 1469598103934665603ull) {
  for (const char c : data) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
  }
  return h;
}

}  // namespace ctxbench

#endif  // CTXBENCH_HASHING_HPP_
