#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "filtrage/characteristics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/random.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage::models {

// X is a Brownian motion observed through a filtration that refreshes only
// at multiples of the block width: the projection holds the last revealed
// value and jumps when the next block opens. The shrunk triple is (0, 0, nu)
// with nu purely atomic, one centered Gaussian atom per block boundary. The
// continuous process acquires jumps purely from the observation pattern.
class CoarseBrownianModel {
 public:
  explicit CoarseBrownianModel(double block = 1.0) : block_(block) {
    if (block_ <= 0.0) throw std::invalid_argument("CoarseBrownianModel: block width");
  }

  double block() const { return block_; }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    PathBundle bundle(grid, n_paths, seed);
    Matrix& x = bundle.add_series("X");
    double sdt = std::sqrt(grid.dt());
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      double xv = 0.0;
      x.at(p, 0) = 0.0;
      for (std::size_t k = 1; k < grid.size(); ++k) {
        xv += sdt * rng.normal();
        x.at(p, k) = xv;
      }
    }
    return bundle;
  }

  // grid indices of block boundaries, starting at 0
  std::vector<std::size_t> block_indices(const TimeGrid& grid) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0;; ++n) {
      double t = static_cast<double>(n) * block_;
      if (t > grid.horizon + 1e-12) break;
      std::size_t idx = grid.index_at_or_after(t);
      if (std::abs(grid.time(idx) - t) > 1e-9)
        throw std::invalid_argument("CoarseBrownianModel: blocks must align with the grid");
      out.push_back(idx);
    }
    if (out.size() < 2)
      throw std::invalid_argument("CoarseBrownianModel: horizon shorter than one block");
    return out;
  }

  // boundaries where the projection actually jumps (skips time zero)
  std::vector<std::size_t> atom_indices(const TimeGrid& grid) const {
    std::vector<std::size_t> out = block_indices(grid);
    out.erase(out.begin());
    return out;
  }

  CharacteristicReport f_oracle(const TimeGrid& grid) const {
    CharacteristicReport rep;
    rep.grid = grid;
    rep.first.assign(grid.size(), 0.0);
    rep.first_se.assign(grid.size(), 0.0);
    rep.second.assign(grid.size(), 0.0);
    rep.second_se.assign(grid.size(), 0.0);
    rep.jump_compensator.ac_part.assign(grid.size(), {});
    for (std::size_t idx : atom_indices(grid))
      rep.jump_compensator.atomic_part.push_back(
          {idx, grid.time(idx), MarkDistribution::gaussian(0.0, block_)});
    return rep;
  }

 private:
  double block_;
};

}  // namespace filtrage::models
