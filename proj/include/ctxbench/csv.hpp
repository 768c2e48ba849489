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

#ifndef CTXBENCH_CSV_HPP_
#define CTXBENCH_CSV_HPP_

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctxbench/errors.hpp"

namespace ctxbench {

// Round-trip-exact decimal form for doubles in text artifacts.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw Error("csv: missing column '" + name + "'");
  }
};

// Fields in this toolkit never contain commas or quotes, so no escaping.
inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open csv for writing: " + path);
  auto write_row = [&out](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.push_back("");
    if (first) {
      table.header = std::move(row);
      first = false;
    } else {
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace ctxbench

#endif  // CTXBENCH_CSV_HPP_
