#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "filtrage/characteristics.hpp"
#include "filtrage/estimation.hpp"
#include "filtrage/numerics.hpp"
#include "filtrage/projection.hpp"

namespace filtrage {

enum class ShrinkageMode { Adapted, NotAdapted };

// F-side driver Z for the not-adapted engine: deterministic bracket densities
// and jump compensator on the grid. Every catalog case has a deterministic
// driver law, which is what makes the closed-form route checkable.
struct DriverSpec {
  std::string name;
  std::vector<double> bracket_density;       // d<Z>/dt
  std::vector<double> cont_bracket_density;  // d<Z^c>/dt
  CompensatorMeasure jump_compensator;       // nu^{Z,F}
};

struct ShrinkageCase {
  ShrinkageMode mode = ShrinkageMode::Adapted;
  bool immersion = false;  // declared by the model variant, never inferred
  std::optional<DriverSpec> driver;

  void validate(const TimeGrid& grid) const {
    if (mode == ShrinkageMode::NotAdapted) {
      if (!driver) throw std::invalid_argument("ShrinkageCase: not-adapted mode needs a driver");
      if (!immersion)
        throw std::invalid_argument("ShrinkageCase: not-adapted mode requires immersion");
      if (driver->bracket_density.size() != grid.size() ||
          driver->cont_bracket_density.size() != grid.size())
        throw std::invalid_argument("ShrinkageCase: driver bracket arrays must match the grid");
      for (std::size_t k = 0; k < grid.size(); ++k)
        if (driver->cont_bracket_density[k] > driver->bracket_density[k] + 1e-12)
          throw std::invalid_argument("ShrinkageCase: <Z^c> density exceeds <Z> density");
    }
  }
};

// --- adapted mode -----------------------------------------------------------

// B^F as the cumulative integral of the projected drift density, evaluated
// along each path's own features and aggregated with the composite trapezoid
// rule (the left rule's O(dt) bias can exceed the 3 SE band near t = 0; the
// fit at each endpoint uses no look-ahead, so trapezoid is purely a better
// quadrature of the same integrand). The standard error comes from the raw
// integrated drift: by the tower property the aggregate equals the raw
// sample mean up to bin noise, and the raw dispersion is its honest sampling
// scale (fitted values can be nearly deterministic even when the estimator
// is not). Raises if too many evaluations land in unreliable bins.
inline CurveEstimate adapted_first_characteristic(const DifferentialCharacteristics& diff,
                                                  const ProjectionEstimate& proj_drift,
                                                  const FeatureFn& features,
                                                  double max_unreliable_frac = 0.01) {
  const TimeGrid& grid = diff.grid();
  std::size_t n = diff.n_paths();
  CurveEstimate out;
  out.value.assign(grid.size(), 0.0);
  out.se.assign(grid.size(), 0.0);
  std::vector<double> acc(n, 0.0), acc_raw(n, 0.0), prev(n), cur(n), prev_raw(n);
  double fbuf[2];
  double dt = grid.dt();
  std::size_t fallbacks = 0;
  {
    const auto& s0 = proj_drift.slice_for(0);
    for (std::size_t p = 0; p < n; ++p) {
      features(p, s0.feature_index, fbuf);
      bool fb = false;
      prev[p] = proj_drift.eval(0, fbuf, &fb);
      fallbacks += fb ? 1 : 0;
      prev_raw[p] = diff.drift_at(p, 0);
    }
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const auto& s = proj_drift.slice_for(k);
    KahanSum sum;
    for (std::size_t p = 0; p < n; ++p) {
      features(p, s.feature_index, fbuf);
      bool fb = false;
      cur[p] = proj_drift.eval(k, fbuf, &fb);
      fallbacks += fb ? 1 : 0;
      acc[p] += 0.5 * (prev[p] + cur[p]) * dt;
      double raw = diff.drift_at(p, k);
      acc_raw[p] += 0.5 * (prev_raw[p] + raw) * dt;
      prev[p] = cur[p];
      prev_raw[p] = raw;
      sum.add(acc[p]);
    }
    double m = sum.value() / static_cast<double>(n);
    KahanSum mr;
    for (std::size_t p = 0; p < n; ++p) mr.add(acc_raw[p]);
    double m_raw = mr.value() / static_cast<double>(n);
    KahanSum q;
    for (std::size_t p = 0; p < n; ++p) q.add((acc_raw[p] - m_raw) * (acc_raw[p] - m_raw));
    out.value[k] = m;
    out.se[k] = n > 1 ? std::sqrt(q.value() / n / static_cast<double>(n)) : 0.0;
  }
  double total = static_cast<double>(n) * static_cast<double>(grid.size());
  if (total > 0.0 && static_cast<double>(fallbacks) / total > max_unreliable_frac)
    throw std::runtime_error("adapted_first_characteristic: unreliable-bin fraction too high");
  return out;
}

// The second characteristic passes through unchanged in adapted mode; this is
// the cumulative integral of the diffusion density.
inline CurveEstimate adapted_second_characteristic(const DifferentialCharacteristics& diff) {
  CharacteristicReport rep = integrate_characteristics(diff);
  return {rep.second, rep.second_se};
}

// nu^F keeps the marks and predictably projects the intensities. The returned
// measure is the cross-path aggregate view; bin-level values live in the
// supplied projections and are what the comparison rows read.
inline CompensatorMeasure adapted_jump_compensator(
    const DifferentialCharacteristics& diff, const std::vector<ProjectionEstimate>& proj_intensity,
    const FeatureFn& features, double max_unreliable_frac = 0.01) {
  if (proj_intensity.size() != diff.kernel().size())
    throw std::invalid_argument("adapted_jump_compensator: one projection per kernel layer");
  const TimeGrid& grid = diff.grid();
  std::size_t n = diff.n_paths();
  CompensatorMeasure out;
  out.ac_part.assign(grid.size(), {});
  double fbuf[2];
  std::size_t fallbacks = 0, evals = 0;
  for (std::size_t layer = 0; layer < diff.kernel().size(); ++layer) {
    const KernelLayer& kl = diff.kernel()[layer];
    const ProjectionEstimate& proj = proj_intensity[layer];
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto& s = proj.slice_for(k);
      KahanSum lam_sum, weighted_mark;
      for (std::size_t p = 0; p < n; ++p) {
        features(p, s.feature_index, fbuf);
        bool fb = false;
        double lam = proj.eval(k, fbuf, &fb);
        fallbacks += fb ? 1 : 0;
        ++evals;
        lam_sum.add(lam);
        weighted_mark.add(lam * kl.mark_at(p, k));
      }
      double lam_mean = lam_sum.value() / static_cast<double>(n);
      if (lam_mean <= 0.0) continue;
      double mark = lam_sum.value() != 0.0 ? weighted_mark.value() / lam_sum.value() : 0.0;
      out.ac_part[k].push_back({MarkDistribution::point(mark), lam_mean});
    }
  }
  if (evals > 0 && static_cast<double>(fallbacks) / static_cast<double>(evals) > max_unreliable_frac)
    throw std::runtime_error("adapted_jump_compensator: unreliable-bin fraction too high");
  return out;
}

// Full adapted-mode triple. With the immersion flag set the projections are
// bypassed and the G-triple passes through exactly.
inline CharacteristicReport adapted_characteristics(const DifferentialCharacteristics& diff,
                                                    const ShrinkageCase& sc,
                                                    const ProjectionEstimate* proj_drift,
                                                    const std::vector<ProjectionEstimate>* proj_intensity,
                                                    const FeatureFn* features) {
  sc.validate(diff.grid());
  if (sc.mode != ShrinkageMode::Adapted)
    throw std::invalid_argument("adapted_characteristics: wrong mode");
  if (sc.immersion || diff.deterministic()) return integrate_characteristics(diff);
  if (!proj_drift || !proj_intensity || !features)
    throw std::invalid_argument("adapted_characteristics: projections required without immersion");
  CharacteristicReport rep;
  rep.grid = diff.grid();
  CurveEstimate b = adapted_first_characteristic(diff, *proj_drift, *features);
  rep.first = std::move(b.value);
  rep.first_se = std::move(b.se);
  CurveEstimate c = adapted_second_characteristic(diff);
  rep.second = std::move(c.value);
  rep.second_se = std::move(c.se);
  rep.jump_compensator = adapted_jump_compensator(diff, *proj_intensity, *features);
  return rep;
}

// --- not-adapted mode --------------------------------------------------------

// b-hat a as a pathwise matrix, for fitting its optional projection.
inline std::shared_ptr<Matrix> modified_drift(const DifferentialCharacteristics& diff,
                                              TruncationPolicy chi = {}) {
  auto out = std::make_shared<Matrix>(diff.n_paths(), diff.grid().size());
  for (std::size_t p = 0; p < diff.n_paths(); ++p)
    for (std::size_t k = 0; k < diff.grid().size(); ++k)
      out->at(p, k) = diff.modified_drift_at(p, k, chi);
  return out;
}

struct HCoefficient {
  ProjectionEstimate estimate;       // predictable projection of H
  std::vector<double> mean;          // cross-path mean per grid point
  std::vector<double> se;
};

// h = predictable projection of the bracket-ratio integrand H. H comes in
// closed form from the model family; the estimator here only projects it.
// TODO(estimation): an empirical bracket-ratio fallback for models without a
// closed-form H needs a bias analysis before it can be wired in.
inline HCoefficient h_coefficient(std::size_t n_paths, const TimeGrid& grid,
                                  const ShrinkageCase& sc, const FeatureSpec& spec,
                                  const FeatureFn& features, const TargetFn& H,
                                  std::vector<std::size_t> fit_indices = {}, int min_count = 30) {
  sc.validate(grid);
  if (sc.mode != ShrinkageMode::NotAdapted)
    throw std::invalid_argument("h_coefficient: not-adapted mode only");
  const DriverSpec& drv = *sc.driver;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (drv.bracket_density[k] > 0.0) continue;
    for (std::size_t p = 0; p < n_paths; ++p)
      if (H(p, k) != 0.0)
        throw std::runtime_error("h_coefficient: <Z> density vanishes where H != 0");
  }
  HCoefficient h;
  h.estimate =
      fit_predictable_projection(n_paths, grid, spec, features, H, std::move(fit_indices), min_count);
  h.mean.assign(grid.size(), 0.0);
  h.se.assign(grid.size(), 0.0);
  double fbuf[2];
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& s = h.estimate.slice_for(k);
    KahanSum sum, raw;
    for (std::size_t p = 0; p < n_paths; ++p) {
      features(p, s.feature_index, fbuf);
      sum.add(h.estimate.eval(k, fbuf));
      raw.add(H(p, k));
    }
    double m = sum.value() / static_cast<double>(n_paths);
    double m_raw = raw.value() / static_cast<double>(n_paths);
    // sampling scale of the aggregate from the raw targets; see
    // adapted_first_characteristic for why the fitted dispersion is not it
    KahanSum q;
    for (std::size_t p = 0; p < n_paths; ++p) {
      double v = H(p, k) - m_raw;
      q.add(v * v);
    }
    h.mean[k] = m;
    h.se[k] = n_paths > 1 ? std::sqrt(q.value() / n_paths / static_cast<double>(n_paths)) : 0.0;
  }
  return h;
}

struct NotAdaptedResult {
  CharacteristicReport report;          // B^F, C^F, nu^F
  std::vector<double> modified_first;   // B-hat^F, before the big-jump correction
  std::vector<double> big_jump_term;    // the correction itself, per grid point
};

// Assemble the F-triple of a non-adapted projection: C^F from h^2 against the
// driver's continuous bracket, nu^F as the image of the driver compensator
// under x -> h x, and B^F as the projected modified drift minus the big-jump
// integral of the nu^F just built (so the modified-drift identity holds by
// construction).
inline NotAdaptedResult notadapted_characteristics(std::size_t n_paths, const TimeGrid& grid,
                                                   const ShrinkageCase& sc,
                                                   const ProjectionEstimate& proj_modified_drift,
                                                   const HCoefficient& h, const FeatureFn& features,
                                                   const Matrix* raw_modified_drift = nullptr,
                                                   double mark_floor = 1e-12,
                                                   double max_unreliable_frac = 0.01) {
  sc.validate(grid);
  if (sc.mode != ShrinkageMode::NotAdapted)
    throw std::invalid_argument("notadapted_characteristics: wrong mode");
  const DriverSpec& drv = *sc.driver;
  NotAdaptedResult res;
  CharacteristicReport& rep = res.report;
  rep.grid = grid;

  // B-hat^F, trapezoid rule as in adapted_first_characteristic; SE from the
  // raw modified drift when available, for the same reason as there
  std::vector<double> acc(n_paths, 0.0), acc_raw(n_paths, 0.0), prev(n_paths), prev_raw(n_paths);
  rep.first.assign(grid.size(), 0.0);
  rep.first_se.assign(grid.size(), 0.0);
  res.modified_first.assign(grid.size(), 0.0);
  double fbuf[2];
  double dt = grid.dt();
  std::size_t fallbacks = 0;
  {
    const auto& s0 = proj_modified_drift.slice_for(0);
    for (std::size_t p = 0; p < n_paths; ++p) {
      features(p, s0.feature_index, fbuf);
      bool fb = false;
      prev[p] = proj_modified_drift.eval(0, fbuf, &fb);
      fallbacks += fb ? 1 : 0;
      if (raw_modified_drift) prev_raw[p] = raw_modified_drift->at(p, 0);
    }
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const auto& s = proj_modified_drift.slice_for(k);
    KahanSum sum;
    for (std::size_t p = 0; p < n_paths; ++p) {
      features(p, s.feature_index, fbuf);
      bool fb = false;
      double cur = proj_modified_drift.eval(k, fbuf, &fb);
      fallbacks += fb ? 1 : 0;
      acc[p] += 0.5 * (prev[p] + cur) * dt;
      prev[p] = cur;
      if (raw_modified_drift) {
        double raw = raw_modified_drift->at(p, k);
        acc_raw[p] += 0.5 * (prev_raw[p] + raw) * dt;
        prev_raw[p] = raw;
      }
      sum.add(acc[p]);
    }
    double m = sum.value() / static_cast<double>(n_paths);
    const std::vector<double>& basis = raw_modified_drift ? acc_raw : acc;
    KahanSum mb;
    for (std::size_t p = 0; p < n_paths; ++p) mb.add(basis[p]);
    double mbv = mb.value() / static_cast<double>(n_paths);
    KahanSum q;
    for (std::size_t p = 0; p < n_paths; ++p) q.add((basis[p] - mbv) * (basis[p] - mbv));
    res.modified_first[k] = m;
    rep.first_se[k] = n_paths > 1 ? std::sqrt(q.value() / n_paths / static_cast<double>(n_paths)) : 0.0;
  }
  double total_evals = static_cast<double>(n_paths) * static_cast<double>(grid.size());
  if (total_evals > 0.0 && static_cast<double>(fallbacks) / total_evals > max_unreliable_frac)
    throw std::runtime_error("notadapted_characteristics: unreliable-bin fraction too high");

  // C^F: integral of h^2 against d<Z^c>, along each path's h
  rep.second.assign(grid.size(), 0.0);
  rep.second_se.assign(grid.size(), 0.0);
  std::vector<double> acc2(n_paths, 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double cb = drv.cont_bracket_density[k - 1];
    KahanSum sum;
    if (cb != 0.0) {
      const auto& s = h.estimate.slice_for(k - 1);
      for (std::size_t p = 0; p < n_paths; ++p) {
        features(p, s.feature_index, fbuf);
        double hv = h.estimate.eval(k - 1, fbuf);
        acc2[p] += hv * hv * cb * dt;
        sum.add(acc2[p]);
      }
    } else {
      for (std::size_t p = 0; p < n_paths; ++p) sum.add(acc2[p]);
    }
    double m = sum.value() / static_cast<double>(n_paths);
    KahanSum q;
    for (std::size_t p = 0; p < n_paths; ++p) q.add((acc2[p] - m) * (acc2[p] - m));
    rep.second[k] = m;
    rep.second_se[k] = n_paths > 1 ? std::sqrt(q.value() / n_paths / static_cast<double>(n_paths)) : 0.0;
  }

  // nu^F as the image of nu^{Z,F} under the aggregated h
  CompensatorMeasure& nu = rep.jump_compensator;
  nu.ac_part.assign(grid.size(), {});
  if (!drv.jump_compensator.ac_part.empty()) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (k >= drv.jump_compensator.ac_part.size()) break;
      for (const auto& atom : drv.jump_compensator.ac_part[k]) {
        MarkDistribution img = atom.dist.scaled(h.mean[k]);
        if (img.kind == MarkDistribution::Kind::PointMass && std::abs(img.a) < mark_floor) continue;
        if (atom.intensity <= 0.0) continue;
        nu.ac_part[k].push_back({img, atom.intensity});
      }
    }
  }
  for (const auto& ta : drv.jump_compensator.atomic_part) {
    MarkDistribution img = ta.dist.scaled(h.mean[ta.index]);
    if (img.kind == MarkDistribution::Kind::PointMass && std::abs(img.a) < mark_floor) continue;
    nu.atomic_part.push_back({ta.index, ta.time, img});
  }

  // big-jump correction from the measure just built
  res.big_jump_term.assign(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    res.big_jump_term[k] = nu.big_jump_integral(k, grid);
    rep.first[k] = res.modified_first[k] - res.big_jump_term[k];
  }
  return res;
}

// --- diagnostic --------------------------------------------------------------

struct HeroicCheckResult {
  double max_deviation = 0.0;   // worst bin-level gap between the two routes
  double max_excess = 0.0;      // gap minus the allowed band; <= 0 means pass
};

// Bin-level comparison of the projected cumulative drift against the
// cumulative projected drift density. The difference process is a martingale
// in general and vanishes under immersion, which is what this checks.
inline HeroicCheckResult heroic_drift_identity_check(std::size_t n_paths, const TimeGrid& grid,
                                                     const FeatureSpec& spec,
                                                     const FeatureFn& features,
                                                     const TargetFn& cumulative_drift,
                                                     const TargetFn& drift_density,
                                                     std::vector<std::size_t> fit_indices = {},
                                                     int min_count = 30, double band_mult = 3.0) {
  ProjectionEstimate proj_density = fit_optional_projection(n_paths, grid, spec, features,
                                                            drift_density, fit_indices, min_count);
  // integrate the projected density along each path (trapezoid, matching the
  // engine's quadrature rule)
  Matrix integrated(n_paths, grid.size());
  double fbuf[2];
  double dt = grid.dt();
  for (std::size_t p = 0; p < n_paths; ++p) {
    double a = 0.0;
    const auto& s0 = proj_density.slice_for(0);
    features(p, s0.feature_index, fbuf);
    double prev = proj_density.eval(0, fbuf);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const auto& s = proj_density.slice_for(k);
      features(p, s.feature_index, fbuf);
      double cur = proj_density.eval(k, fbuf);
      a += 0.5 * (prev + cur) * dt;
      prev = cur;
      integrated.at(p, k) = a;
    }
  }
  ProjectionEstimate proj_cum = fit_optional_projection(n_paths, grid, spec, features,
                                                        cumulative_drift, fit_indices, min_count);
  ProjectionEstimate proj_int = fit_optional_projection(
      n_paths, grid, spec, features,
      [&](std::size_t p, std::size_t k) { return integrated.at(p, k); }, fit_indices, min_count);

  HeroicCheckResult res;
  for (std::size_t si = 0; si < proj_cum.slices_.size(); ++si) {
    const auto& sa = proj_cum.slices_[si];
    const auto& sb = proj_int.slices_[si];
    for (std::size_t i = 0; i < sa.bins.size(); ++i) {
      if (!sa.bins[i].reliable || !sb.bins[i].reliable) continue;
      double dev = std::abs(sa.bins[i].mean - sb.bins[i].mean);
      double band = band_mult * (sa.bins[i].se + sb.bins[i].se);
      res.max_deviation = std::max(res.max_deviation, dev);
      res.max_excess = std::max(res.max_excess, dev - band);
    }
  }
  return res;
}

}  // namespace filtrage
