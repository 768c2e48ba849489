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

#include "ctxbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ctxbench/csv.hpp"
#include "ctxbench/errors.hpp"

namespace ctxbench {

ModeMetrics min_metrics(const std::vector<Matrix>& mode_trajectories, const Vector& confidences,
                        const Matrix& gt_future, const std::vector<uint8_t>& future_valid) {
  if (mode_trajectories.empty()) throw ContractError("min_metrics: no modes");
  const int t_fut = static_cast<int>(gt_future.rows());
  int last_valid = -1;
  int n_valid = 0;
  for (int t = 0; t < t_fut; ++t) {
    if (future_valid[t]) {
      last_valid = t;
      ++n_valid;
    }
  }
  if (last_valid < 0) throw ContractError("min_metrics: no valid future step");

  ModeMetrics out;
  double best_fde = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < mode_trajectories.size(); ++k) {
    const Matrix& traj = mode_trajectories[k];
    const double fde = (traj.row(last_valid) - gt_future.row(last_valid)).norm();
    if (fde < best_fde) {
      best_fde = fde;
      out.best_mode = static_cast<int>(k);
    }
  }
  const Matrix& best = mode_trajectories[out.best_mode];
  double ade = 0.0;
  for (int t = 0; t < t_fut; ++t) {
    if (future_valid[t]) ade += (best.row(t) - gt_future.row(t)).norm();
  }
  out.ade = ade / n_valid;
  out.fde = best_fde;
  out.brier_fde = brier_fde(best_fde, confidences(out.best_mode));
  return out;
}

double brier_fde(double fde, double p) {
  if (p < 0.0 || p > 1.0) throw ContractError("brier_fde: confidence outside [0, 1]");
  return fde + (1.0 - p) * (1.0 - p);
}

StratifiedRow stratified_report(const std::vector<AgentMetrics>& metrics,
                                const std::vector<double>& bin_edges,
                                const std::string& population) {
  for (size_t i = 1; i < bin_edges.size(); ++i) {
    if (bin_edges[i] <= bin_edges[i - 1]) {
      throw ContractError("stratified_report: bin edges must be strictly increasing");
    }
  }
  StratifiedRow row;
  row.population = population;
  row.bin_edges = bin_edges;
  const int n_bins = static_cast<int>(bin_edges.size()) + 1;
  row.bin_counts.assign(n_bins, 0);
  row.bin_ade.assign(n_bins, 0.0);
  row.bin_fde.assign(n_bins, 0.0);
  row.bin_brier.assign(n_bins, 0.0);

  for (const auto& m : metrics) {
    int bin = 0;
    while (bin < static_cast<int>(bin_edges.size()) && m.difficulty >= bin_edges[bin]) ++bin;
    row.bin_counts[bin] += 1;
    row.bin_ade[bin] += m.ade;
    row.bin_fde[bin] += m.fde;
    row.bin_brier[bin] += m.brier_fde;
    row.total += 1;
  }

  int non_empty = 0;
  for (int b = 0; b < n_bins; ++b) {
    if (row.bin_counts[b] == 0) continue;
    row.bin_ade[b] /= row.bin_counts[b];
    row.bin_fde[b] /= row.bin_counts[b];
    row.bin_brier[b] /= row.bin_counts[b];
    row.ade += row.bin_ade[b];
    row.fde += row.bin_fde[b];
    row.brier += row.bin_brier[b];
    ++non_empty;
  }
  if (non_empty > 0) {
    row.ade /= non_empty;
    row.fde /= non_empty;
    row.brier /= non_empty;
  }
  return row;
}

namespace {

GapCell make_cell(double value, std::optional<double> reference) {
  GapCell cell;
  cell.value = value;
  if (reference) {
    if (*reference == 0.0) {
      cell.undefined_reference = true;
    } else {
      cell.relative_change = (value - *reference) / *reference * 100.0;
    }
  }
  return cell;
}

std::string cell_text(const GapCell& cell) {
  char buf[64];
  if (cell.undefined_reference) {
    std::snprintf(buf, sizeof(buf), "%.2f (n/a)", cell.value);
  } else if (cell.relative_change) {
    std::snprintf(buf, sizeof(buf), "%.2f (%+.1f%%)", cell.value, *cell.relative_change);
  } else {
    std::snprintf(buf, sizeof(buf), "%.2f (-)", cell.value);
  }
  return buf;
}

}  // namespace

GapTable gap_report(
    const std::vector<std::pair<std::string, std::pair<StratifiedRow, StratifiedRow>>>& method_rows,
    const std::string& setting, const std::string& reference_method) {
  const StratifiedRow* ref = nullptr;
  for (const auto& [method, rows] : method_rows) {
    if (method == reference_method) ref = &rows.first;
  }
  if (ref == nullptr) throw ContractError("gap_report: reference method not present");

  GapTable table;
  for (const auto& [method, rows] : method_rows) {
    const auto& [seen, unseen] = rows;
    GapRow out;
    out.setting = setting;
    out.method = method;
    const bool is_ref = method == reference_method;
    auto maybe_ref = [is_ref](double v) -> std::optional<double> {
      if (is_ref) return std::nullopt;
      return v;
    };
    out.seen_ade = make_cell(seen.ade, maybe_ref(ref->ade));
    out.seen_fde = make_cell(seen.fde, maybe_ref(ref->fde));
    out.seen_brier = make_cell(seen.brier, maybe_ref(ref->brier));
    out.unseen_ade = make_cell(unseen.ade, std::optional<double>(ref->ade));
    out.unseen_fde = make_cell(unseen.fde, std::optional<double>(ref->fde));
    out.unseen_brier = make_cell(unseen.brier, std::optional<double>(ref->brier));
    table.rows.push_back(std::move(out));
  }
  return table;
}

std::string render_gap_table(const GapTable& table) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Setting", "Method", "Seen ADE", "Seen FDE", "Seen Brier-FDE", "Unseen ADE",
                   "Unseen FDE", "Unseen Brier-FDE"});
  for (const auto& row : table.rows) {
    cells.push_back({row.setting, row.method, cell_text(row.seen_ade), cell_text(row.seen_fde),
                     cell_text(row.seen_brier), cell_text(row.unseen_ade),
                     cell_text(row.unseen_fde), cell_text(row.unseen_brier)});
  }
  std::vector<size_t> widths(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream os;
  for (size_t r = 0; r < cells.size(); ++r) {
    for (size_t c = 0; c < cells[r].size(); ++c) {
      os << cells[r][c] << std::string(widths[c] - cells[r][c].size() + 2, ' ');
    }
    os << '\n';
    if (r == 0) {
      size_t total = 0;
      for (const size_t w : widths) total += w + 2;
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

void write_gap_csv(const GapTable& table, const std::string& path) {
  CsvTable csv;
  csv.header = {"setting", "method"};
  for (const char* pop : {"seen", "unseen"}) {
    for (const char* metric : {"ade", "fde", "brier_fde"}) {
      csv.header.push_back(std::string(pop) + "_" + metric);
      csv.header.push_back(std::string(pop) + "_" + metric + "_pct");
    }
  }
  for (const auto& row : table.rows) {
    auto pct = [](const GapCell& c) -> std::string {
      if (!c.relative_change) return "";
      return format_double(*c.relative_change);
    };
    csv.rows.push_back({row.setting, row.method,
                        format_double(row.seen_ade.value), pct(row.seen_ade),
                        format_double(row.seen_fde.value), pct(row.seen_fde),
                        format_double(row.seen_brier.value), pct(row.seen_brier),
                        format_double(row.unseen_ade.value), pct(row.unseen_ade),
                        format_double(row.unseen_fde.value), pct(row.unseen_fde),
                        format_double(row.unseen_brier.value), pct(row.unseen_brier)});
  }
  write_csv(path, csv);
}

GapTable read_gap_csv(const std::string& path) {
  const CsvTable csv = read_csv(path);
  GapTable table;
  auto cell = [&csv](const std::vector<std::string>& row, const std::string& name) {
    GapCell c;
    c.value = std::stod(row[csv.column(name)]);
    const std::string pct = row[csv.column(name + "_pct")];
    if (!pct.empty()) c.relative_change = std::stod(pct);
    return c;
  };
  for (const auto& row : csv.rows) {
    GapRow r;
    r.setting = row[csv.column("setting")];
    r.method = row[csv.column("method")];
    r.seen_ade = cell(row, "seen_ade");
    r.seen_fde = cell(row, "seen_fde");
    r.seen_brier = cell(row, "seen_brier_fde");
    r.unseen_ade = cell(row, "unseen_ade");
    r.unseen_fde = cell(row, "unseen_fde");
    r.unseen_brier = cell(row, "unseen_brier_fde");
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace ctxbench
