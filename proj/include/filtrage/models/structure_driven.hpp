#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "filtrage/characteristics.hpp"
#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/projection.hpp"
#include "filtrage/random.hpp"
#include "filtrage/shrinkage.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage::models {

// Predictable coefficient of the form c0 + c1 sin(W) + c2 cos(M), evaluated
// at the left grid point. sin/cos keep everything bounded, which the
// integrability assumptions of the projection machinery want anyway.
struct Coefficient {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;

  double operator()(double w, double m) const {
    return c0 + c1 * std::sin(w) + c2 * std::cos(m);
  }
  bool constant() const { return c1 == 0.0 && c2 == 0.0; }
  double bound() const { return std::abs(c0) + std::abs(c1) + std::abs(c2); }
};

// Which sub-filtration is observed and which martingale drives it:
//   A: F generated by the structure-equation solution V, Z = integral of alpha dV
//   B: F generated by the compensated Poisson part,      Z = M
//   C: F generated by the Brownian part,                 Z = W
//   D: same driver as C; the catalog pins coefficients so X is a plain
//      Poisson process whose projection is continuous
enum class StructureCase { A, B, C, D };

// Jump-diffusion X = x0 + int beta dt + int gamma dW + small-jump part dM +
// big-jump part dN, where N is Poisson with deterministic intensity
// lambda(t) = alpha^2(t)/phi^2(t) (zero where phi vanishes) and M = N - int
// lambda. The pair (phi, alpha) also defines the structure-equation solution
//   dV = 1{phi=0} dW + (phi/alpha)(dN - lambda dt)
// whose filtration is the observed one in case A. phi and alpha must be
// grid-aligned: constant on each cell, phi either exactly zero or bounded
// away from zero there.
class StructureModel {
 public:
  StructureModel(StructureCase sc, std::function<double(double)> phi,
                 std::function<double(double)> alpha, Coefficient beta, Coefficient gamma,
                 Coefficient kappa, double x0 = 0.0)
      : case_(sc),
        phi_(std::move(phi)),
        alpha_(std::move(alpha)),
        beta_(beta),
        gamma_(gamma),
        kappa_(kappa),
        x0_(x0) {
    if (!phi_ || !alpha_) throw std::invalid_argument("StructureModel: phi and alpha required");
  }

  StructureCase structure_case() const { return case_; }
  const Coefficient& beta() const { return beta_; }
  const Coefficient& gamma() const { return gamma_; }
  const Coefficient& kappa() const { return kappa_; }

  double lambda(double t) const {
    double ph = phi_(t);
    if (ph == 0.0) return 0.0;
    double al = alpha_(t);
    return al * al / (ph * ph);
  }
  bool diffusive(double t) const { return phi_(t) == 0.0; }
  double phi_over_alpha(double t) const {
    double ph = phi_(t);
    return ph == 0.0 ? 0.0 : ph / alpha_(t);
  }

  std::vector<double> intensity_profile(const TimeGrid& grid) const {
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = lambda(grid.time(k));
    return out;
  }

  // left-endpoint cumulative intensity; exact for cell-constant lambda
  std::vector<double> cumulative_intensity(const TimeGrid& grid) const {
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k)
      out[k] = out[k - 1] + lambda(grid.time(k - 1)) * grid.dt();
    return out;
  }

  // E[cos M_t] for M = N - Lambda(t): the Poisson characteristic function
  // evaluated at 1, shifted by the compensator
  static double expected_cos_m(double cum_lambda) {
    return std::exp(cum_lambda * (std::cos(1.0) - 1.0)) *
           std::cos(cum_lambda * (std::sin(1.0) - 1.0));
  }

  // E[coefficient | observed filtration] when the hidden part averages out:
  // cases A and B observe the Poisson side, so the coefficient may not load
  // on cos(M); cases C and D observe W, so it may not load on sin(W).
  double projected_coefficient(const Coefficient& c, double cum_lambda) const {
    if (case_ == StructureCase::A || case_ == StructureCase::B) {
      if (c.c2 != 0.0)
        throw std::invalid_argument("StructureModel: cos(M) load is observable in cases A/B");
      return c.c0;  // E[sin W] = 0
    }
    if (c.c1 != 0.0)
      throw std::invalid_argument("StructureModel: sin(W) load is observable in cases C/D");
    return c.c0 + c.c2 * expected_cos_m(cum_lambda);
  }

  PathBundle simulate(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) const {
    double lam_max = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      lam_max = std::max(lam_max, lambda(grid.time(k)));
      validate_cell(grid.time(k), grid.dt());
    }
    PathBundle bundle(grid, n_paths, seed);
    Matrix& x = bundle.add_series("X");
    Matrix& w = bundle.add_series("W");
    Matrix& nn = bundle.add_series("N");
    Matrix& mm = bundle.add_series("M");
    Matrix& v = bundle.add_series("V");
    Matrix& z = bundle.add_series("Z");
    double dt = grid.dt(), sdt = std::sqrt(dt);
    std::vector<double> lam = intensity_profile(grid);
    std::vector<double> cum = cumulative_intensity(grid);
    for (std::size_t p = 0; p < n_paths; ++p) {
      SplitRng rng(seed, p);
      std::vector<double> events = thinned_events(rng, lam_max, grid.horizon);
      double xv = x0_, wv = 0.0, vv = 0.0, zv = 0.0;
      std::size_t nv = 0, hit = 0;
      x.at(p, 0) = xv;
      w.at(p, 0) = 0.0;
      nn.at(p, 0) = 0.0;
      mm.at(p, 0) = 0.0;
      v.at(p, 0) = 0.0;
      z.at(p, 0) = 0.0;
      for (std::size_t k = 1; k < grid.size(); ++k) {
        double tl = grid.time(k - 1);
        double ph = phi_(tl), al = alpha_(tl), la = lam[k - 1];
        double i_t = ph == 0.0 ? 1.0 : 0.0;
        double bv = beta_(wv, mm.at(p, k - 1));
        double gv = gamma_(wv, mm.at(p, k - 1));
        double kv = kappa_(wv, mm.at(p, k - 1));
        double dw = sdt * rng.normal();
        double xinc = (bv - (std::abs(kv) <= 1.0 ? kv * la : 0.0)) * dt + gv * dw;
        double vinc = i_t * dw - (i_t == 1.0 ? 0.0 : ph / al * la * dt);
        double zinc = i_t * al * dw - (i_t == 1.0 ? 0.0 : ph * la * dt);
        while (hit < events.size() && events[hit] <= grid.time(k)) {
          double tau = events[hit++];
          double mark_v = phi_(tau) / alpha_(tau);
          xinc += kv;
          vinc += mark_v;
          zinc += phi_(tau);
          ++nv;
          bundle.add_jump("X", {p, k, tau, kv});
          bundle.add_jump("N", {p, k, tau, 1.0});
          bundle.add_jump("M", {p, k, tau, 1.0});
          bundle.add_jump("V", {p, k, tau, mark_v});
          bundle.add_jump("Z", {p, k, tau, phi_(tau)});
        }
        xv += xinc;
        wv += dw;
        vv += vinc;
        zv += zinc;
        x.at(p, k) = xv;
        w.at(p, k) = wv;
        nn.at(p, k) = static_cast<double>(nv);
        mm.at(p, k) = static_cast<double>(nv) - cum[k];
        v.at(p, k) = vv;
        z.at(p, k) = zv;
      }
    }
    return bundle;
  }

  DifferentialCharacteristics g_characteristics(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& w = bundle.series("W");
    const Matrix& m = bundle.series("M");
    std::size_t n = bundle.n_paths();
    auto drift = std::make_shared<Matrix>(n, grid.size());
    auto diff = std::make_shared<Matrix>(n, grid.size());
    auto mark = std::make_shared<Matrix>(n, grid.size());
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double wv = w.at(p, k), mv = m.at(p, k);
        double gv = gamma_(wv, mv);
        drift->at(p, k) = beta_(wv, mv);
        diff->at(p, k) = gv * gv;
        mark->at(p, k) = kappa_(wv, mv);
      }
    KernelLayer layer;
    layer.mark_matrix = mark;
    layer.intensity_profile =
        std::make_shared<const std::vector<double>>(intensity_profile(grid));
    return DifferentialCharacteristics(grid, n, drift, diff, {layer}, false);
  }

  // the bracket-ratio integrand whose predictable projection is h
  std::shared_ptr<Matrix> h_target(const PathBundle& bundle) const {
    const TimeGrid& grid = bundle.grid();
    const Matrix& w = bundle.series("W");
    const Matrix& m = bundle.series("M");
    auto out = std::make_shared<Matrix>(bundle.n_paths(), grid.size());
    for (std::size_t p = 0; p < bundle.n_paths(); ++p)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double wv = w.at(p, k), mv = m.at(p, k);
        double t = grid.time(k);
        double val = 0.0;
        switch (case_) {
          case StructureCase::A:
            val = diffusive(t) ? gamma_(wv, mv) / alpha_(t) : kappa_(wv, mv) / phi_(t);
            break;
          case StructureCase::B:
            val = kappa_(wv, mv);
            break;
          case StructureCase::C:
          case StructureCase::D:
            val = gamma_(wv, mv);
            break;
        }
        out->at(p, k) = val;
      }
    return out;
  }

  DriverSpec driver_spec(const TimeGrid& grid) const {
    DriverSpec spec;
    spec.bracket_density.assign(grid.size(), 0.0);
    spec.cont_bracket_density.assign(grid.size(), 0.0);
    spec.jump_compensator.ac_part.assign(grid.size(), {});
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double t = grid.time(k);
      double al = alpha_(t), ph = phi_(t), la = lambda(t);
      switch (case_) {
        case StructureCase::A:
          spec.name = "Z = alpha.V";
          spec.bracket_density[k] = al * al;
          spec.cont_bracket_density[k] = diffusive(t) ? al * al : 0.0;
          if (!diffusive(t))
            spec.jump_compensator.ac_part[k].push_back({MarkDistribution::point(ph), la});
          break;
        case StructureCase::B:
          spec.name = "Z = M";
          spec.bracket_density[k] = la;
          if (la > 0.0)
            spec.jump_compensator.ac_part[k].push_back({MarkDistribution::point(1.0), la});
          break;
        case StructureCase::C:
        case StructureCase::D:
          spec.name = "Z = W";
          spec.bracket_density[k] = 1.0;
          spec.cont_bracket_density[k] = 1.0;
          break;
      }
    }
    return spec;
  }

  ShrinkageCase shrinkage_case(const TimeGrid& grid) const {
    return {ShrinkageMode::NotAdapted, true, driver_spec(grid)};
  }

  // feature the projections condition on, per observed filtration
  const char* feature_series() const {
    switch (case_) {
      case StructureCase::A:
        return "V";
      case StructureCase::B:
        return "N";
      default:
        return "W";
    }
  }
  FeatureSpec feature_spec() const {
    if (case_ == StructureCase::B) return {{FeatureDef{FeatureKind::Discrete, 0}}};
    return {{FeatureDef{FeatureKind::Continuous, 64}}};
  }

  // deterministic h on the grid; needs the hidden load to average out
  std::vector<double> h_oracle(const TimeGrid& grid) const {
    std::vector<double> cum = cumulative_intensity(grid);
    std::vector<double> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double t = grid.time(k);
      switch (case_) {
        case StructureCase::A:
          out[k] = diffusive(t) ? projected_coefficient(gamma_, cum[k]) / alpha_(t)
                                : projected_coefficient(kappa_, cum[k]) / phi_(t);
          break;
        case StructureCase::B:
          out[k] = projected_coefficient(kappa_, cum[k]);
          break;
        case StructureCase::C:
        case StructureCase::D:
          out[k] = projected_coefficient(gamma_, cum[k]);
          break;
      }
    }
    return out;
  }

  // closed-form F-triple; restricted to constant beta and small kappa so the
  // big-jump indicator never fires (the catalog keeps inside that region)
  CharacteristicReport f_oracle(const TimeGrid& grid) const {
    if (!beta_.constant())
      throw std::invalid_argument("StructureModel: oracle needs constant beta");
    if (kappa_.bound() > 1.0)
      throw std::invalid_argument("StructureModel: oracle needs |kappa| <= 1");
    std::vector<double> cum = cumulative_intensity(grid);
    CharacteristicReport rep;
    rep.grid = grid;
    rep.first.resize(grid.size());
    rep.first_se.assign(grid.size(), 0.0);
    rep.second.assign(grid.size(), 0.0);
    rep.second_se.assign(grid.size(), 0.0);
    rep.jump_compensator.ac_part.assign(grid.size(), {});
    bool w_observed = case_ == StructureCase::C || case_ == StructureCase::D;
    double lam0 = lambda(0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double t = grid.time(k);
      rep.first[k] = beta_.c0 * t;
      if (w_observed) {
        // C^F = int (E[gamma | F])^2 ds, smooth integrand, fixed-rate Lambda
        rep.second[k] = simpson(
            [&](double s) {
              double g = projected_coefficient(gamma_, lam0 * s);
              return g * g;
            },
            0.0, t, 256);
      } else if (!diffusive(t)) {
        double mk = projected_coefficient(kappa_, cum[k]);
        if (mk != 0.0)
          rep.jump_compensator.ac_part[k].push_back({MarkDistribution::point(mk), lambda(t)});
      }
    }
    if (w_observed) {
      for (std::size_t k = 0; k + 1 < grid.size(); ++k)
        if (lambda(grid.time(k)) != lam0)
          throw std::invalid_argument("StructureModel: oracle needs constant lambda");
    }
    return rep;
  }

 private:
  void validate_cell(double t, double dt) const {
    if (alpha_(t) <= 0.0) throw std::invalid_argument("StructureModel: alpha must be positive");
    // regimes must not flip inside a cell
    if ((phi_(t) == 0.0) != (phi_(t + 0.5 * dt) == 0.0))
      throw std::invalid_argument("StructureModel: phi regime must be grid-aligned");
  }

  // Poisson times by thinning against the peak rate; exact for the
  // cell-constant intensities this family uses
  std::vector<double> thinned_events(SplitRng& rng, double lam_max, double horizon) const {
    std::vector<double> out;
    if (lam_max <= 0.0) return out;
    double t = 0.0;
    while ((t += rng.exponential(lam_max)) <= horizon)
      if (rng.uniform() * lam_max < lambda(t)) out.push_back(t);
    return out;
  }

  StructureCase case_;
  std::function<double(double)> phi_, alpha_;
  Coefficient beta_, gamma_, kappa_;
  double x0_;
};

namespace detail {

// Realized-bracket gap in the structure equation d[V] = dt + (phi/alpha) dV,
// with the bracket split into continuous squared increments plus exact
// squared marks. Calls visit(p, k, lhs - rhs) at every cell.
template <typename Visit>
void structure_residual_scan(const StructureModel& model, const PathBundle& bundle, Visit visit) {
  const TimeGrid& grid = bundle.grid();
  const Matrix& v = bundle.series("V");
  std::size_t n = bundle.n_paths();
  std::vector<std::vector<std::pair<std::size_t, double>>> marks(n);
  for (const JumpEvent& e : bundle.jumps("V")) marks[e.path].push_back({e.index, e.mark});
  double dt = grid.dt();
  for (std::size_t p = 0; p < n; ++p) {
    double lhs = 0.0, rhs = 0.0;
    std::size_t hit = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      double dv = v.at(p, k) - v.at(p, k - 1);
      double cont = dv, mark_sq = 0.0;
      while (hit < marks[p].size() && marks[p][hit].first == k) {
        cont -= marks[p][hit].second;
        mark_sq += marks[p][hit].second * marks[p][hit].second;
        ++hit;
      }
      lhs += cont * cont + mark_sq;
      rhs += dt + model.phi_over_alpha(grid.time(k - 1)) * dv;
      visit(p, k, lhs - rhs);
    }
  }
}

}  // namespace detail

// Max over grid points of the cross-path mean residual. Averaging cancels the
// Brownian realized-variance noise, so this stays small in mixed regimes too.
inline double structure_equation_residual(const StructureModel& model, const PathBundle& bundle) {
  std::vector<KahanSum> resid(bundle.grid().size());
  detail::structure_residual_scan(model, bundle,
                                  [&](std::size_t, std::size_t k, double r) { resid[k].add(r); });
  double worst = 0.0, n = static_cast<double>(bundle.n_paths());
  for (std::size_t k = 1; k < resid.size(); ++k)
    worst = std::max(worst, std::abs(resid[k].value() / n));
  return worst;
}

// Max over paths and grid points of the residual. In the pure-jump regime
// (phi never zero) the bracket has no Brownian part, so this is O(dt) on
// every path; Brownian cells only satisfy the equation in expectation, at a
// sqrt(dt) realized rate, and belong to the cross-path mean check above.
inline double structure_equation_residual_worst_path(const StructureModel& model,
                                                     const PathBundle& bundle) {
  double worst = 0.0;
  detail::structure_residual_scan(
      model, bundle, [&](std::size_t, std::size_t, double r) { worst = std::max(worst, std::abs(r)); });
  return worst;
}

}  // namespace filtrage::models
