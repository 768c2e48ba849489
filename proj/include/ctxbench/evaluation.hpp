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

#ifndef CTXBENCH_EVALUATION_HPP_
#define CTXBENCH_EVALUATION_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxbench/neural.hpp"

namespace ctxbench {

struct ModeMetrics {
  double ade = 0.0;
  double fde = 0.0;
  double brier_fde = 0.0;
  int best_mode = -1;
};

// FDE is the L2 error at the final valid future step; the best mode minimizes
// FDE and its ADE (mean L2 over valid steps) is reported. Requires at least
// one valid step.
ModeMetrics min_metrics(const std::vector<Matrix>& mode_trajectories,  // per mode: t_fut x 2
                        const Vector& confidences, const Matrix& gt_future,
                        const std::vector<uint8_t>& future_valid);

// fde + (1 - p)^2 with p in [0, 1].
double brier_fde(double fde, double p);

struct AgentMetrics {
  std::string scenario_id;
  std::string agent_id;
  double ade = 0.0;
  double fde = 0.0;
  double brier_fde = 0.0;
  double difficulty = 0.0;
};

struct StratifiedRow {
  std::string population;  // "seen" or "unseen"
  std::vector<double> bin_edges;   // interior edges; bins cover [0, inf)
  std::vector<int> bin_counts;
  std::vector<double> bin_ade, bin_fde, bin_brier;  // per-bin means
  double ade = 0.0;        // unweighted mean across non-empty bins
  double fde = 0.0;
  double brier = 0.0;
  int total = 0;
};

// Difficulty-balanced averaging: per-bin means first, then an unweighted
// mean across non-empty bins.
StratifiedRow stratified_report(const std::vector<AgentMetrics>& metrics,
                                const std::vector<double>& bin_edges,
                                const std::string& population);

struct GapCell {
  double value = 0.0;
  std::optional<double> relative_change;  // percent vs the reference seen value
  bool undefined_reference = false;       // reference was zero
};

struct GapRow {
  std::string setting;
  std::string method;
  GapCell seen_ade, seen_fde, seen_brier;
  GapCell unseen_ade, unseen_fde, unseen_brier;
};

struct GapTable {
  std::vector<GapRow> rows;
};

// Relative change of every metric against the reference method's Seen value
// on the same setting, mirroring the published table layout.
GapTable gap_report(const std::vector<std::pair<std::string, std::pair<StratifiedRow, StratifiedRow>>>&
                        method_rows,  // (method, (seen, unseen)) in display order
                    const std::string& setting, const std::string& reference_method);

std::string render_gap_table(const GapTable& table);
void write_gap_csv(const GapTable& table, const std::string& path);
GapTable read_gap_csv(const std::string& path);

}  // namespace ctxbench

#endif  // CTXBENCH_EVALUATION_HPP_
