#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "filtrage/time_grid.hpp"
#include "filtrage/truncation.hpp"

namespace filtrage {

// Dense path-major array: row p is one path sampled on the grid.
struct Matrix {
  std::size_t n_paths = 0;
  std::size_t n_times = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t paths, std::size_t times, double fill = 0.0)
      : n_paths(paths), n_times(times), data(paths * times, fill) {}

  double& at(std::size_t p, std::size_t k) { return data[p * n_times + k]; }
  double at(std::size_t p, std::size_t k) const { return data[p * n_times + k]; }
  double* row(std::size_t p) { return data.data() + p * n_times; }
  const double* row(std::size_t p) const { return data.data() + p * n_times; }
};

// A jump is stored as an explicit event with its exact time and mark; the
// sampled series only sees the post-jump level at the next grid point, so
// marks are never smeared by dt.
struct JumpEvent {
  std::size_t path = 0;
  std::size_t index = 0;  // first grid index with time >= the event time
  double time = 0.0;
  double mark = 0.0;
};

class PathBundle {
 public:
  PathBundle() = default;
  PathBundle(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed)
      : grid_(grid), n_paths_(n_paths), seed_(seed) {
    if (n_paths == 0) throw std::invalid_argument("PathBundle: n_paths == 0");
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  std::uint64_t seed() const { return seed_; }

  Matrix& add_series(const std::string& name) {
    auto [it, fresh] = series_.emplace(name, Matrix(n_paths_, grid_.size()));
    if (!fresh) throw std::invalid_argument("PathBundle: series exists: " + name);
    return it->second;
  }

  bool has_series(const std::string& name) const { return series_.count(name) != 0; }

  const Matrix& series(const std::string& name) const {
    auto it = series_.find(name);
    if (it == series_.end()) throw std::out_of_range("PathBundle: unknown series: " + name);
    return it->second;
  }
  Matrix& series(const std::string& name) {
    auto it = series_.find(name);
    if (it == series_.end()) throw std::out_of_range("PathBundle: unknown series: " + name);
    return it->second;
  }

  // events must be appended in nondecreasing (path, time) order per series
  void add_jump(const std::string& series_name, const JumpEvent& e) { jumps_[series_name].push_back(e); }

  const std::vector<JumpEvent>& jumps(const std::string& series_name) const {
    static const std::vector<JumpEvent> none;
    auto it = jumps_.find(series_name);
    return it == jumps_.end() ? none : it->second;
  }

  const std::map<std::string, Matrix>& all_series() const { return series_; }
  const std::map<std::string, std::vector<JumpEvent>>& all_jumps() const { return jumps_; }

 private:
  TimeGrid grid_;
  std::size_t n_paths_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::string, Matrix> series_;
  std::map<std::string, std::vector<JumpEvent>> jumps_;
};

// X(chi): subtract the initial value and replace every jump by its truncated
// mark. The result has jumps of size at most the cutoff and is the process
// whose finite-variation compensator the drift estimators target.
inline Matrix cutoff_process(const PathBundle& bundle, const std::string& name,
                             TruncationPolicy chi = {}) {
  const Matrix& x = bundle.series(name);  // throws on unknown name
  Matrix out(x.n_paths, x.n_times);
  for (std::size_t p = 0; p < x.n_paths; ++p)
    for (std::size_t k = 0; k < x.n_times; ++k) out.at(p, k) = x.at(p, k) - x.at(p, 0);
  for (const JumpEvent& e : bundle.jumps(name)) {
    double removed = e.mark - chi(e.mark);
    if (removed == 0.0) continue;
    for (std::size_t k = e.index; k < x.n_times; ++k) out.at(e.path, k) -= removed;
  }
  return out;
}

}  // namespace filtrage
