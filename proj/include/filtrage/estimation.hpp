#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/time_grid.hpp"
#include "filtrage/truncation.hpp"

namespace filtrage {

struct CurveEstimate {
  std::vector<double> value;  // one entry per grid point
  std::vector<double> se;
};

// Increment-over-risk-set cumulative hazard. Event times are exact; the risk
// set at an event counts paths whose (single) event has not happened yet,
// so no grid bias enters. Paths with an empty list never leave the risk set.
inline CurveEstimate nelson_aalen(const std::vector<std::vector<double>>& event_times,
                                  const TimeGrid& grid) {
  std::size_t n = event_times.size();
  if (n == 0) throw std::invalid_argument("nelson_aalen: no paths");
  std::vector<double> times;
  times.reserve(n);
  for (const auto& evs : event_times) {
    if (evs.size() > 1)
      throw std::invalid_argument("nelson_aalen: expected at most one event per path");
    if (!evs.empty()) times.push_back(evs.front());
  }
  std::sort(times.begin(), times.end());

  CurveEstimate out;
  out.value.assign(grid.size(), 0.0);
  out.se.assign(grid.size(), 0.0);
  KahanSum haz, var;
  std::size_t e = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double t = grid.time(k);
    while (e < times.size() && times[e] <= t) {
      double at_risk = static_cast<double>(n - e);  // events strictly before times[e] have left
      haz.add(1.0 / at_risk);
      var.add(1.0 / (at_risk * at_risk));
      ++e;
    }
    out.value[k] = haz.value();
    out.se[k] = std::sqrt(var.value());
  }
  return out;
}

inline double jump_threshold(double dt, double c = 4.0) { return c * std::pow(dt, 0.49); }

// Threshold scan of a sampled series: any one-step increment beyond
// c dt^0.49 is declared a jump with the raw increment as its mark.
inline std::vector<JumpEvent> detect_jumps(const Matrix& series, const TimeGrid& grid,
                                           double c = 4.0) {
  double thr = jump_threshold(grid.dt(), c);
  std::vector<JumpEvent> out;
  for (std::size_t p = 0; p < series.n_paths; ++p)
    for (std::size_t k = 1; k < series.n_times; ++k) {
      double d = series.at(p, k) - series.at(p, k - 1);
      if (std::abs(d) > thr) out.push_back({p, k, grid.time(k), d});
    }
  return out;
}

// Realized quadratic variation of the continuous part: sum of squared
// increments below the jump threshold, cross-path aggregated.
inline CurveEstimate realized_qv(const Matrix& series, const TimeGrid& grid, double c = 4.0) {
  double thr = jump_threshold(grid.dt(), c);
  std::size_t n = series.n_paths;
  std::vector<double> acc(n, 0.0);
  CurveEstimate out;
  out.value.assign(grid.size(), 0.0);
  out.se.assign(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    KahanSum s;
    for (std::size_t p = 0; p < n; ++p) {
      double d = series.at(p, k) - series.at(p, k - 1);
      if (std::abs(d) <= thr) acc[p] += d * d;
      s.add(acc[p]);
    }
    double m = s.value() / static_cast<double>(n);
    KahanSum q;
    for (std::size_t p = 0; p < n; ++p) q.add((acc[p] - m) * (acc[p] - m));
    out.value[k] = m;
    out.se[k] = n > 1 ? std::sqrt(q.value() / n / static_cast<double>(n)) : 0.0;
  }
  return out;
}

// Cross realized covariation of two series along the same paths. With two
// independently fitted projections of the same target this cancels the
// fit noise that inflates a plain realized_qv of either one.
inline CurveEstimate realized_cross_qv(const Matrix& a, const Matrix& b, const TimeGrid& grid,
                                       double c = 4.0) {
  if (a.n_paths != b.n_paths || a.n_times != b.n_times)
    throw std::invalid_argument("realized_cross_qv: shape mismatch");
  double thr = jump_threshold(grid.dt(), c);
  std::size_t n = a.n_paths;
  std::vector<double> acc(n, 0.0);
  CurveEstimate out;
  out.value.assign(grid.size(), 0.0);
  out.se.assign(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    KahanSum s;
    for (std::size_t p = 0; p < n; ++p) {
      double da = a.at(p, k) - a.at(p, k - 1);
      double db = b.at(p, k) - b.at(p, k - 1);
      if (std::abs(da) <= thr && std::abs(db) <= thr) acc[p] += da * db;
      s.add(acc[p]);
    }
    double m = s.value() / static_cast<double>(n);
    KahanSum q;
    for (std::size_t p = 0; p < n; ++p) q.add((acc[p] - m) * (acc[p] - m));
    out.value[k] = m;
    out.se[k] = n > 1 ? std::sqrt(q.value() / n / static_cast<double>(n)) : 0.0;
  }
  return out;
}

// Cross-path mean of the truncated-jump-adjusted path: estimates the first
// characteristic (the drift of the cutoff process). The jump list may come
// from the simulator (exact events) or from detect_jumps.
inline CurveEstimate drift_estimate(const Matrix& series, const std::vector<JumpEvent>& jumps,
                                    const TimeGrid& grid, TruncationPolicy chi = {}) {
  std::size_t n = series.n_paths;
  Matrix adj(n, series.n_times);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t k = 0; k < series.n_times; ++k)
      adj.at(p, k) = series.at(p, k) - series.at(p, 0);
  for (const JumpEvent& e : jumps) {
    double removed = e.mark - chi(e.mark);
    if (removed == 0.0) continue;
    for (std::size_t k = e.index; k < series.n_times; ++k) adj.at(e.path, k) -= removed;
  }
  CurveEstimate out;
  out.value.assign(grid.size(), 0.0);
  out.se.assign(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    KahanSum s;
    for (std::size_t p = 0; p < n; ++p) s.add(adj.at(p, k));
    double m = s.value() / static_cast<double>(n);
    KahanSum q;
    for (std::size_t p = 0; p < n; ++p) q.add((adj.at(p, k) - m) * (adj.at(p, k) - m));
    out.value[k] = m;
    out.se[k] = n > 1 ? std::sqrt(q.value() / n / static_cast<double>(n)) : 0.0;
  }
  return out;
}

inline CurveEstimate drift_estimate(const PathBundle& bundle, const std::string& series,
                                    TruncationPolicy chi = {}) {
  return drift_estimate(bundle.series(series), bundle.jumps(series), bundle.grid(), chi);
}

struct MarkWindow {
  double t_lo = 0.0, t_hi = 0.0;
  std::vector<double> marks;
};

// Group jump marks into fixed-width time windows.
inline std::vector<MarkWindow> jump_mark_histogram(const std::vector<JumpEvent>& jumps,
                                                   const TimeGrid& grid, double window_width) {
  if (!(window_width > 0.0)) throw std::invalid_argument("jump_mark_histogram: bad window");
  std::size_t n_win = static_cast<std::size_t>(std::ceil(grid.horizon / window_width));
  std::vector<MarkWindow> out(n_win);
  for (std::size_t w = 0; w < n_win; ++w) {
    out[w].t_lo = w * window_width;
    out[w].t_hi = std::min(grid.horizon, (w + 1) * window_width);
  }
  for (const JumpEvent& e : jumps) {
    auto w = static_cast<std::size_t>(e.time / window_width);
    if (w >= n_win) w = n_win - 1;
    out[w].marks.push_back(e.mark);
  }
  return out;
}

// Marks of an atomic compensator read from a sampled series: the increment of
// the series over each block between consecutive atom indices. No threshold
// is applied, so small marks are kept and the collection is censoring-free.
inline std::vector<std::vector<double>> atomic_marks(const Matrix& series,
                                                     const std::vector<std::size_t>& atom_indices) {
  std::vector<std::vector<double>> out(atom_indices.size());
  for (std::size_t i = 0; i < atom_indices.size(); ++i) {
    std::size_t hi = atom_indices[i];
    std::size_t lo = i == 0 ? 0 : atom_indices[i - 1];
    if (hi >= series.n_times || lo >= hi) throw std::invalid_argument("atomic_marks: bad indices");
    out[i].reserve(series.n_paths);
    for (std::size_t p = 0; p < series.n_paths; ++p)
      out[i].push_back(series.at(p, hi) - series.at(p, lo));
  }
  return out;
}

}  // namespace filtrage
