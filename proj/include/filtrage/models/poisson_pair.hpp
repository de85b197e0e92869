#pragma once

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <vector>

#include "filtrage/characteristics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/random.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage::models {

// Bivariate homogeneous Poisson process N = (N1, N2) built from three
// independent streams: atoms (1,0), (0,1) and (1,1) with rates l10, l01,
// l11. X = N1 jumps by one at rate l10 + l11. The triple of X under the big
// filtration is deterministic, so shrinking to the filtration of X alone
// changes nothing; the harness checks that passthrough against simulation.
class PoissonPairModel {
 public:
  PoissonPairModel(double l10, double l01, double l11) : l10_(l10), l01_(l01), l11_(l11) {
    if (l10_ < 0.0 || l01_ < 0.0 || l11_ < 0.0)
      throw std::invalid_argument("PoissonPairModel: rates must be nonnegative");
    if (l10_ + l11_ <= 0.0)
      throw std::invalid_argument("PoissonPairModel: X must jump at a positive rate");
  }

  double x_intensity() const { return l10_ + l11_; }
  double common_fraction() const { return l11_ / (l10_ + l11_); }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    PathBundle bundle(grid, n_paths, seed);
    Matrix& x = bundle.add_series("X");
    Matrix& n2 = bundle.add_series("N2");
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      std::vector<double> ev10 = stream(rng, l10_, grid.horizon);
      std::vector<double> ev01 = stream(rng, l01_, grid.horizon);
      std::vector<double> ev11 = stream(rng, l11_, grid.horizon);
      std::vector<double> evx = merged(ev10, ev11);
      std::vector<double> evn2 = merged(ev01, ev11);
      fill_counting(x, p, grid, evx);
      fill_counting(n2, p, grid, evn2);
      for (double t : evx) bundle.add_jump("X", {p, grid.index_at_or_after(t), t, 1.0});
      for (double t : evn2) bundle.add_jump("N2", {p, grid.index_at_or_after(t), t, 1.0});
    }
    return bundle;
  }

  DifferentialCharacteristics g_characteristics(const TimeGrid& grid) const {
    auto drift = std::make_shared<Matrix>(1, grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) drift->at(0, k) = l10_ + l11_;
    KernelLayer layer;
    layer.mark_value = 1.0;
    layer.intensity_value = l10_ + l11_;
    return DifferentialCharacteristics(grid, 1, drift, nullptr, {layer}, true);
  }

  CharacteristicReport f_oracle(const TimeGrid& grid) const {
    CharacteristicReport rep;
    rep.grid = grid;
    rep.first.resize(grid.size());
    rep.first_se.assign(grid.size(), 0.0);
    rep.second.assign(grid.size(), 0.0);
    rep.second_se.assign(grid.size(), 0.0);
    rep.jump_compensator.ac_part.assign(grid.size(), {});
    for (std::size_t k = 0; k < grid.size(); ++k) {
      rep.first[k] = (l10_ + l11_) * grid.time(k);
      rep.jump_compensator.ac_part[k].push_back({MarkDistribution::point(1.0), l10_ + l11_});
    }
    return rep;
  }

 private:
  static std::vector<double> stream(SplitRng& rng, double rate, double horizon) {
    std::vector<double> out;
    if (rate <= 0.0) return out;
    double t = 0.0;
    while ((t += rng.exponential(rate)) <= horizon) out.push_back(t);
    return out;
  }

  static std::vector<double> merged(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
    return out;
  }

  static void fill_counting(Matrix& m, std::size_t p, const TimeGrid& grid,
                            const std::vector<double>& events) {
    std::size_t hit = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double t = grid.time(k);
      while (hit < events.size() && events[hit] <= t) ++hit;
      m.at(p, k) = static_cast<double>(hit);
    }
  }

  double l10_, l01_, l11_;
};

}  // namespace filtrage::models
