#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace filtrage {

// Uniform grid on [0, horizon] with steps+1 points. Every pathwise array in
// the library is indexed by this grid.
struct TimeGrid {
  double horizon = 0.0;
  std::size_t steps = 0;

  TimeGrid() = default;
  TimeGrid(double horizon_, std::size_t steps_) : horizon(horizon_), steps(steps_) {
    if (!(horizon > 0.0) || steps == 0)
      throw std::invalid_argument("TimeGrid: need horizon > 0 and steps >= 1");
  }

  double dt() const { return horizon / static_cast<double>(steps); }
  std::size_t size() const { return steps + 1; }
  double time(std::size_t k) const { return static_cast<double>(k) * dt(); }

  // first grid index with time >= t, clamped to the grid
  std::size_t index_at_or_after(double t) const {
    if (t <= 0.0) return 0;
    double k = std::ceil(t / dt() - 1e-12);
    auto idx = static_cast<std::size_t>(k);
    return idx > steps ? steps : idx;
  }

  std::vector<double> times() const {
    std::vector<double> ts(size());
    for (std::size_t k = 0; k < ts.size(); ++k) ts[k] = time(k);
    return ts;
  }
};

}  // namespace filtrage
