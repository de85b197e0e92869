#pragma once

#include <cmath>
#include <iostream>
#include <memory>
#include <stdexcept>

#include "filtrage/characteristics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/random.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage::models {

// Two-dimensional diffusion (X, Y2) driven by two Brownian motions. The
// volatility loading of X on each driver depends on the hidden coordinate
// through a mixing angle, but the total variance depends on X alone:
//   dX  = -drift_scale X dt + sigma1(X) (cos(Y2) dW1 + sin(Y2) dW2)
//   dY2 = -0.5 sin(Y2) dt + 0.3 dW1 + 0.4 dW2
// with sigma1(x) = vol_base + vol_swing tanh(x). Observing X alone already
// pins down drift and quadratic variation, so the shrunk triple coincides
// with the full-information one pathwise even though neither driver is
// observable.
class BivariateDiffusionModel {
 public:
  BivariateDiffusionModel(double drift_scale = 0.1, double vol_base = 0.2,
                          double vol_swing = 0.1, double clamp_box = 1e3)
      : drift_scale_(drift_scale),
        vol_base_(vol_base),
        vol_swing_(vol_swing),
        clamp_box_(clamp_box) {
    if (vol_base_ - std::abs(vol_swing_) <= 0.0)
      throw std::invalid_argument("BivariateDiffusionModel: volatility must stay positive");
    if (clamp_box_ <= 1.0) throw std::invalid_argument("BivariateDiffusionModel: clamp box");
  }

  double mu1(double x) const { return -drift_scale_ * x; }
  double sigma1(double x) const { return vol_base_ + vol_swing_ * std::tanh(x); }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    PathBundle bundle(grid, n_paths, seed);
    Matrix& x = bundle.add_series("X");
    Matrix& y2 = bundle.add_series("Y2");
    double dt = grid.dt(), sdt = std::sqrt(dt);
    long clamped = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      double xv = 1.0, yv = 1.0;
      x.at(p, 0) = xv;
      y2.at(p, 0) = yv;
      for (std::size_t k = 1; k < grid.size(); ++k) {
        double dw1 = sdt * rng.normal(), dw2 = sdt * rng.normal();
        double xn = xv + mu1(xv) * dt + sigma1(xv) * (std::cos(yv) * dw1 + std::sin(yv) * dw2);
        double yn = yv - 0.5 * std::sin(yv) * dt + 0.3 * dw1 + 0.4 * dw2;
        xv = clamp(xn, clamped);
        yv = clamp(yn, clamped);
        x.at(p, k) = xv;
        y2.at(p, k) = yv;
      }
    }
    if (clamped > 0)
      std::cerr << "BivariateDiffusionModel: clamped " << clamped
                << " state values to the +-" << clamp_box_ << " box\n";
    return bundle;
  }

  DifferentialCharacteristics g_characteristics(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& x = bundle.series("X");
    auto drift = std::make_shared<Matrix>(bundle.n_paths(), grid.size());
    auto diff = std::make_shared<Matrix>(bundle.n_paths(), grid.size());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double s = sigma1(x.at(p, k));
        drift->at(p, k) = mu1(x.at(p, k));
        diff->at(p, k) = s * s;
      }
    return DifferentialCharacteristics(grid, bundle.n_paths(), drift, diff, {}, false);
  }

 private:
  double clamp(double v, long& count) const {
    if (v > clamp_box_) {
      ++count;
      return clamp_box_;
    }
    if (v < -clamp_box_) {
      ++count;
      return -clamp_box_;
    }
    return v;
  }

  double drift_scale_, vol_base_, vol_swing_, clamp_box_;
};

}  // namespace filtrage::models
