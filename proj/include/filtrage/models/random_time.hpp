#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "filtrage/characteristics.hpp"
#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/random.hpp"
#include "filtrage/shrinkage.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage::models {

// Default indicator X = 1{tau <= t} observed through the Brownian filtration
// alone. tau is independent exponential, so the conditional survival curve
// is the unconditional one, the projection of X is the deterministic cdf and
// the shrunk triple is (cdf, 0, 0). Independence also makes the Brownian
// filtration immersed in the enlarged one, so the driver route applies with
// an identically zero bracket ratio.
class RandomTimeIndepModel {
 public:
  explicit RandomTimeIndepModel(double rate = 1.0) : rate_(rate) {
    if (rate_ <= 0.0) throw std::invalid_argument("RandomTimeIndepModel: rate");
  }

  double rate() const { return rate_; }
  double cdf(double t) const { return 1.0 - std::exp(-rate_ * t); }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    PathBundle bundle(grid, n_paths, seed);
    Matrix& w = bundle.add_series("W");
    Matrix& x = bundle.add_series("X");
    double sdt = std::sqrt(grid.dt());
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      double tau = rng.exponential(rate_);
      double wv = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (k > 0) wv += sdt * rng.normal();
        w.at(p, k) = wv;
        x.at(p, k) = tau <= grid.time(k) ? 1.0 : 0.0;
      }
      if (tau <= grid.horizon) bundle.add_jump("X", {p, grid.index_at_or_after(tau), tau, 1.0});
    }
    return bundle;
  }

  // the default intensity under full information: rate on survival, then 0
  DifferentialCharacteristics g_characteristics(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& x = bundle.series("X");
    auto drift = std::make_shared<Matrix>(bundle.n_paths(), grid.size());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
      for (std::size_t k = 0; k < grid.size(); ++k)
        drift->at(p, k) = rate_ * (1.0 - x.at(p, k));
    KernelLayer layer;
    layer.mark_value = 1.0;
    layer.intensity_matrix = drift;
    return DifferentialCharacteristics(grid, bundle.n_paths(), drift, nullptr, {layer}, false);
  }

  DriverSpec driver_spec(const TimeGrid& grid) const {
    DriverSpec spec;
    spec.name = "Z = W";
    spec.bracket_density.assign(grid.size(), 1.0);
    spec.cont_bracket_density.assign(grid.size(), 1.0);
    spec.jump_compensator.ac_part.assign(grid.size(), {});
    return spec;
  }
  ShrinkageCase shrinkage_case(const TimeGrid& grid) const {
    return {ShrinkageMode::NotAdapted, true, driver_spec(grid)};
  }

  CharacteristicReport f_oracle(const TimeGrid& grid) const {
    CharacteristicReport rep;
    rep.grid = grid;
    rep.first.resize(grid.size());
    rep.first_se.assign(grid.size(), 0.0);
    rep.second.assign(grid.size(), 0.0);
    rep.second_se.assign(grid.size(), 0.0);
    rep.jump_compensator.ac_part.assign(grid.size(), {});
    for (std::size_t k = 0; k < grid.size(); ++k) rep.first[k] = cdf(grid.time(k));
    return rep;
  }

 private:
  double rate_;
};

// Here tau = exp(f0 W_S) is measurable with respect to the terminal Brownian
// sigma-field, so the Brownian filtration is not immersed in the enlarged one
// and the driver route is off the table. What survives is the projected
// drift identity: the conditional default intensity, projected back onto the
// Brownian filtration, integrates to the conditional default probability.
// All conditional quantities are explicit Gaussian formulas.
class RandomTimeGaussModel {
 public:
  RandomTimeGaussModel(double f0, double terminal) : f0_(f0), s_(terminal) {
    if (f0_ <= 0.0 || s_ <= 0.0) throw std::invalid_argument("RandomTimeGaussModel: parameters");
  }

  double terminal() const { return s_; }

  // P(tau > t | W_t = w)
  double azema(double w, double t) const {
    if (t <= 0.0) return 1.0;
    return normal_cdf((f0_ * w - std::log(t)) / (f0_ * std::sqrt(s_ - t)));
  }
  // conditional density of tau at u given W_t = w; lognormal in u, so it
  // integrates to 1 over (0, inf) for every (w, t), which tests verify
  double alpha_density(double w, double t, double u) const {
    if (u <= 0.0) return 0.0;
    double sig = f0_ * std::sqrt(s_ - t);
    return normal_pdf((std::log(u) - f0_ * w) / sig) / (u * sig);
  }
  // the same density on the diagonal u = t
  double alpha_tt(double w, double t) const {
    return t <= 0.0 ? 0.0 : alpha_density(w, t, t);
  }
  // unconditional law of tau
  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    return normal_cdf(std::log(t) / (f0_ * std::sqrt(s_)));
  }
  // density of d<m> for the Azema martingale part, per unit time
  double c_density(double w, double t) const {
    if (t <= 0.0) return 0.0;
    double z = (f0_ * w - std::log(t)) / (f0_ * std::sqrt(s_ - t));
    double g = normal_pdf(z) / std::sqrt(s_ - t);
    return g * g;
  }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    if (grid.horizon >= s_)
      throw std::invalid_argument("RandomTimeGaussModel: horizon must stay below the terminal");
    PathBundle bundle(grid, n_paths, seed);
    Matrix& w = bundle.add_series("W");
    Matrix& x = bundle.add_series("X");
    double sdt = std::sqrt(grid.dt());
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      double wv = 0.0;
      w.at(p, 0) = 0.0;
      for (std::size_t k = 1; k < grid.size(); ++k) {
        wv += sdt * rng.normal();
        w.at(p, k) = wv;
      }
      double w_terminal = wv + std::sqrt(s_ - grid.horizon) * rng.normal();
      double tau = std::exp(f0_ * w_terminal);
      for (std::size_t k = 0; k < grid.size(); ++k)
        x.at(p, k) = tau <= grid.time(k) ? 1.0 : 0.0;
      if (tau <= grid.horizon) bundle.add_jump("X", {p, grid.index_at_or_after(tau), tau, 1.0});
    }
    return bundle;
  }

  // conditional default intensity (1 - X) alpha_t(t) / A_t under full
  // information; its projection onto the Brownian filtration is alpha_t(t)
  DifferentialCharacteristics g_characteristics(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& w = bundle.series("W");
    const Matrix& x = bundle.series("X");
    auto drift = std::make_shared<Matrix>(bundle.n_paths(), grid.size());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double t = grid.time(k), wv = w.at(p, k);
        drift->at(p, k) =
            x.at(p, k) != 0.0 ? 0.0 : alpha_tt(wv, t) / azema(wv, t);
      }
    KernelLayer layer;
    layer.mark_value = 1.0;
    layer.intensity_matrix = drift;
    return DifferentialCharacteristics(grid, bundle.n_paths(), drift, nullptr, {layer}, false);
  }

  // pathwise first characteristic, integrated with the same trapezoid rule
  // the engine uses, so the comparison isolates the projection error
  std::vector<double> first_oracle_path(const PathBundle& bundle, std::size_t p) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& w = bundle.series("W");
    std::vector<double> out(grid.size(), 0.0);
    double prev = alpha_tt(w.at(p, 0), grid.time(0));
    for (std::size_t k = 1; k < grid.size(); ++k) {
      double cur = alpha_tt(w.at(p, k), grid.time(k));
      out[k] = out[k - 1] + 0.5 * (prev + cur) * grid.dt();
      prev = cur;
    }
    return out;
  }

 private:
  double f0_, s_;
};

}  // namespace filtrage::models
