#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "filtrage/filtrage.hpp"
#include "filtrage/harness/config.hpp"
#include "filtrage/harness/report_io.hpp"

namespace filtrage::harness {

struct ExperimentContext {
  Config cfg;  // already scoped to the experiment
  std::uint64_t seed = 0;
  double se_mult = 3.0;
  double rel_tol = 0.01;
};

struct ExperimentDef {
  std::string name;
  std::string scenario;
  ExperimentReport (*run)(const ExperimentContext&);
};

namespace detail {

inline void add_row(ExperimentReport& rep, const ExperimentContext& ctx, double t,
                    const std::string& quantity, double mc, double se, double oracle) {
  rep.rows.push_back(make_row(rep.name, t, quantity, mc, se, oracle, ctx.se_mult, ctx.rel_tol));
}

// quarter points of the grid, skipping 0
inline std::vector<std::size_t> quarter_indices(const TimeGrid& grid) {
  std::vector<std::size_t> ks;
  for (std::size_t q = 1; q <= 4; ++q) {
    std::size_t k = q * grid.steps / 4;
    if (k > 0 && (ks.empty() || ks.back() != k)) ks.push_back(k);
  }
  return ks;
}

inline PlotSeries curve_plot(const std::string& slug, const TimeGrid& grid,
                             const std::vector<double>& mc, const std::vector<double>& se,
                             const std::vector<double>& oracle, double band = 3.0) {
  PlotSeries plot;
  plot.quantity_slug = slug;
  plot.points.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    plot.points.push_back({grid.time(k), mc[k], oracle[k], mc[k] - band * se[k], mc[k] + band * se[k]});
  return plot;
}

inline TargetFn matrix_target(const Matrix* m) {
  return [m](std::size_t p, std::size_t k) { return m->at(p, k); };
}

inline std::size_t bins_for(std::size_t n_paths) {
  std::size_t b = n_paths / 50;
  return std::max<std::size_t>(4, std::min<std::size_t>(64, b));
}

inline models::DefaultsFamily parse_family(const std::string& name) {
  if (name == "fgm") return models::DefaultsFamily::Fgm;
  if (name == "independent_exponential") return models::DefaultsFamily::IndependentExponential;
  if (name == "uniform_square") return models::DefaultsFamily::UniformSquare;
  throw ConfigError("two_defaults: unknown family '" + name + "'");
}

// ---- experiment setups (shared between run and simulate) --------------------

struct TwoDefaultsSetup {
  models::TwoDefaultsModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline TwoDefaultsSetup two_defaults_setup(const ExperimentContext& ctx) {
  auto family = parse_family(ctx.cfg.get_string("family", "fgm"));
  double l1 = ctx.cfg.get_double("lambda1", 1.0);
  double l2 = ctx.cfg.get_double("lambda2", 2.0);
  double theta = ctx.cfg.get_double("theta", 0.5);
  double horizon =
      ctx.cfg.get_double("horizon", family == models::DefaultsFamily::UniformSquare ? 0.8 : 1.0);
  std::size_t steps = ctx.cfg.get_size("steps", 100);
  std::size_t n = ctx.cfg.get_size("n_paths", 100000);
  try {
    return {models::TwoDefaultsModel(family, l1, l2, theta), TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("two_defaults: ") + e.what());
  }
}

struct PoissonPairSetup {
  models::PoissonPairModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline PoissonPairSetup poisson_pair_setup(const ExperimentContext& ctx) {
  double l10 = ctx.cfg.get_double("lambda10", 1.0);
  double l01 = ctx.cfg.get_double("lambda01", 1.0);
  double l11 = ctx.cfg.get_double("lambda11", 0.5);
  double horizon = ctx.cfg.get_double("horizon", 2.0);
  std::size_t steps = ctx.cfg.get_size("steps", 100);
  std::size_t n = ctx.cfg.get_size("n_paths", 100000);
  try {
    return {models::PoissonPairModel(l10, l01, l11), TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("poisson_pair: ") + e.what());
  }
}

struct BivDiffusionSetup {
  models::BivariateDiffusionModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline BivDiffusionSetup biv_diffusion_setup(const ExperimentContext& ctx) {
  double drift_scale = ctx.cfg.get_double("drift_scale", 0.1);
  double vol_base = ctx.cfg.get_double("vol_base", 0.2);
  double vol_swing = ctx.cfg.get_double("vol_swing", 0.1);
  double horizon = ctx.cfg.get_double("horizon", 1.0);
  std::size_t steps = ctx.cfg.get_size("steps", 500);
  std::size_t n = ctx.cfg.get_size("n_paths", 10000);
  try {
    return {models::BivariateDiffusionModel(drift_scale, vol_base, vol_swing), TimeGrid(horizon, steps),
            n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("biv_diffusion: ") + e.what());
  }
}

struct StructureSetup {
  models::StructureModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline StructureSetup structure_setup(const ExperimentContext& ctx, models::StructureCase sc,
                                      double phi_def, double beta0_def, double gamma0_def,
                                      double gamma_m_def, double kappa0_def, double kappa_w_def,
                                      std::size_t steps_def, std::size_t n_def) {
  double phi = ctx.cfg.get_double("phi", phi_def);
  double alpha = ctx.cfg.get_double("alpha", 1.0);
  models::Coefficient beta{ctx.cfg.get_double("beta0", beta0_def),
                           ctx.cfg.get_double("beta_w", 0.0), ctx.cfg.get_double("beta_m", 0.0)};
  models::Coefficient gamma{ctx.cfg.get_double("gamma0", gamma0_def),
                            ctx.cfg.get_double("gamma_w", 0.0),
                            ctx.cfg.get_double("gamma_m", gamma_m_def)};
  models::Coefficient kappa{ctx.cfg.get_double("kappa0", kappa0_def),
                            ctx.cfg.get_double("kappa_w", kappa_w_def),
                            ctx.cfg.get_double("kappa_m", 0.0)};
  double x0 = ctx.cfg.get_double("x0", 0.0);
  double horizon = ctx.cfg.get_double("horizon", 1.0);
  std::size_t steps = ctx.cfg.get_size("steps", steps_def);
  std::size_t n = ctx.cfg.get_size("n_paths", n_def);
  try {
    return {models::StructureModel(
                sc, [phi](double) { return phi; }, [alpha](double) { return alpha; }, beta, gamma,
                kappa, x0),
            TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("structure: ") + e.what());
  }
}

struct CoarseBrownianSetup {
  models::CoarseBrownianModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline CoarseBrownianSetup coarse_brownian_setup(const ExperimentContext& ctx) {
  double block = ctx.cfg.get_double("block", 1.0);
  double horizon = ctx.cfg.get_double("horizon", 4.0);
  std::size_t steps = ctx.cfg.get_size("steps", 400);
  std::size_t n = ctx.cfg.get_size("n_paths", 10000);
  try {
    return {models::CoarseBrownianModel(block), TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coarse_brownian: ") + e.what());
  }
}

struct RandomTimeIndepSetup {
  models::RandomTimeIndepModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline RandomTimeIndepSetup random_time_indep_setup(const ExperimentContext& ctx) {
  double rate = ctx.cfg.get_double("rate", 1.0);
  double horizon = ctx.cfg.get_double("horizon", 1.0);
  std::size_t steps = ctx.cfg.get_size("steps", 400);
  std::size_t n = ctx.cfg.get_size("n_paths", 100000);
  try {
    return {models::RandomTimeIndepModel(rate), TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("random_time_indep: ") + e.what());
  }
}

struct RandomTimeGaussSetup {
  models::RandomTimeGaussModel model;
  TimeGrid grid;
  std::size_t n_paths;
};

inline RandomTimeGaussSetup random_time_gauss_setup(const ExperimentContext& ctx) {
  double f0 = ctx.cfg.get_double("f0", 1.0);
  double terminal = ctx.cfg.get_double("terminal", 2.0);
  double horizon = ctx.cfg.get_double("horizon", 1.0);
  std::size_t steps = ctx.cfg.get_size("steps", 200);
  std::size_t n = ctx.cfg.get_size("n_paths", 100000);
  try {
    return {models::RandomTimeGaussModel(f0, terminal), TimeGrid(horizon, steps), n};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("random_time_gauss: ") + e.what());
  }
}

// ---- runners -----------------------------------------------------------------

inline ExperimentReport run_two_defaults(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "two_defaults";
  auto [model, grid, n] = two_defaults_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);

  FeatureFn features = series_features(bundle, {"Y1"});
  FeatureSpec spec = model.f_feature_spec();
  ProjectionEstimate proj_drift =
      fit_optional_projection(n, grid, spec, features, [&](std::size_t p, std::size_t k) {
        return diff.drift_at(p, k);
      });
  std::vector<ProjectionEstimate> proj_intensity{proj_drift};
  ShrinkageCase sc{ShrinkageMode::Adapted, false, std::nullopt};
  CharacteristicReport engine = adapted_characteristics(diff, sc, &proj_drift, &proj_intensity,
                                                        &features);
  CharacteristicReport oracle = model.f_oracle(grid);
  CurveEstimate emp = drift_estimate(bundle, "Y1");

  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", engine.first[k], engine.first_se[k],
            oracle.first[k]);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp.value[k], emp.se[k], oracle.first[k]);
    double f0buf[1] = {0.0};  // survivors' bin
    add_row(rep, ctx, t, "nu^F intensity [engine|oracle]", proj_drift.eval(k, f0buf),
            proj_drift.stderr_at(k, f0buf), model.projected_kappa(t));
    if (!engine.jump_compensator.ac_part[k].empty())
      add_row(rep, ctx, t, "nu^F mark [engine|oracle]",
              engine.jump_compensator.ac_part[k][0].dist.mean(), 0.0, 1.0);
  }

  // window-differenced cumulative hazard against the marginal hazard
  {
    std::vector<std::vector<double>> events(n);
    for (const JumpEvent& e : bundle.jumps("Y1")) events[e.path].push_back(e.time);
    CurveEstimate na = nelson_aalen(events, grid);
    std::size_t mid = grid.steps / 2, w = 5;
    std::size_t lo = mid - w, hi = mid + w;
    double span = grid.time(hi) - grid.time(lo);
    double slope = (na.value[hi] - na.value[lo]) / span;
    double slope_se = std::sqrt(std::max(0.0, na.se[hi] * na.se[hi] - na.se[lo] * na.se[lo])) / span;
    double slope_oracle =
        (model.cumulative_hazard(grid.time(hi)) - model.cumulative_hazard(grid.time(lo))) / span;
    add_row(rep, ctx, grid.time(mid), "nu^F intensity [empirical|oracle]", slope, slope_se,
            slope_oracle);
  }

  rep.plots.push_back(curve_plot("B_F", grid, engine.first, engine.first_se, oracle.first));
  {
    PlotSeries plot;
    plot.quantity_slug = "nuF_intensity";
    for (std::size_t k = 1; k < grid.size(); ++k) {
      double f0buf[1] = {0.0};
      double mc = proj_drift.eval(k, f0buf), se = proj_drift.stderr_at(k, f0buf);
      plot.points.push_back(
          {grid.time(k), mc, model.projected_kappa(grid.time(k)), mc - 3 * se, mc + 3 * se});
    }
    rep.plots.push_back(std::move(plot));
  }
  return rep;
}

inline ExperimentReport run_poisson_pair(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "poisson_pair";
  auto [model, grid, n] = poisson_pair_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  DifferentialCharacteristics gdet = model.g_characteristics(grid);
  ShrinkageCase sc{ShrinkageMode::Adapted, true, std::nullopt};
  CharacteristicReport engine = adapted_characteristics(gdet, sc, nullptr, nullptr, nullptr);
  CharacteristicReport gref = integrate_characteristics(gdet);
  CharacteristicReport oracle = model.f_oracle(grid);
  CurveEstimate emp = drift_estimate(bundle, "X");

  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", engine.first[k], 0.0, oracle.first[k]);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp.value[k], emp.se[k], oracle.first[k]);
    add_row(rep, ctx, t, "C^F [engine|oracle]", engine.second[k], 0.0, 0.0);
    double lam_engine = 0.0;
    for (const auto& atom : engine.jump_compensator.ac_part[k]) lam_engine += atom.intensity;
    add_row(rep, ctx, t, "nu^F intensity [engine|oracle]", lam_engine, 0.0, model.x_intensity());
    if (!engine.jump_compensator.ac_part[k].empty())
      add_row(rep, ctx, t, "nu^F mark [engine|oracle]",
              engine.jump_compensator.ac_part[k][0].dist.mean(), 0.0, 1.0);
  }
  rep.extras["engine_equals_g_triple"] =
      engine.first == gref.first && engine.second == gref.second;
  rep.plots.push_back(curve_plot("B_F", grid, emp.value, emp.se, oracle.first));
  return rep;
}

inline ExperimentReport run_biv_diffusion(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "biv_diffusion";
  auto [model, grid, n] = biv_diffusion_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  CharacteristicReport gref = integrate_characteristics(diff);

  FeatureFn features = series_features(bundle, {"X"});
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous,
                               static_cast<int>(ctx.cfg.get_size("bins", bins_for(n)))}}};
  ProjectionEstimate proj_drift =
      fit_optional_projection(n, grid, spec, features, [&](std::size_t p, std::size_t k) {
        return diff.drift_at(p, k);
      });
  std::vector<ProjectionEstimate> proj_intensity;  // no jump part
  ShrinkageCase sc{ShrinkageMode::Adapted, false, std::nullopt};
  CharacteristicReport engine = adapted_characteristics(diff, sc, &proj_drift, &proj_intensity,
                                                        &features);
  CurveEstimate emp_b = drift_estimate(bundle, "X");
  CurveEstimate emp_c = realized_qv(bundle.series("X"), grid);

  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", engine.first[k], engine.first_se[k], gref.first[k]);
    double se_b = std::sqrt(emp_b.se[k] * emp_b.se[k] + gref.first_se[k] * gref.first_se[k]);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp_b.value[k], se_b, gref.first[k]);
    add_row(rep, ctx, t, "C^F [engine|oracle]", engine.second[k], engine.second_se[k],
            gref.second[k]);
    double se_c = std::sqrt(emp_c.se[k] * emp_c.se[k] + gref.second_se[k] * gref.second_se[k]);
    add_row(rep, ctx, t, "C^F [empirical|oracle]", emp_c.value[k], se_c, gref.second[k]);
  }
  rep.extras["c_engine_equals_g"] = engine.second == gref.second;
  rep.plots.push_back(curve_plot("B_F", grid, engine.first, engine.first_se, gref.first));
  rep.plots.push_back(curve_plot("C_F", grid, emp_c.value, emp_c.se, gref.second));
  return rep;
}

inline ExperimentReport run_structure(const ExperimentContext& ctx, models::StructureCase scase,
                                      const char* name, double phi_def, double beta0_def,
                                      double gamma0_def, double gamma_m_def, double kappa0_def,
                                      double kappa_w_def, std::size_t steps_def, std::size_t n_def) {
  ExperimentReport rep;
  rep.name = name;
  auto [model, grid, n] = structure_setup(ctx, scase, phi_def, beta0_def, gamma0_def, gamma_m_def,
                                          kappa0_def, kappa_w_def, steps_def, n_def);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  ShrinkageCase sc = model.shrinkage_case(grid);
  FeatureFn features = series_features(bundle, {model.feature_series()});
  FeatureSpec spec = model.feature_spec();

  std::shared_ptr<Matrix> Ht = model.h_target(bundle);
  HCoefficient h = h_coefficient(n, grid, sc, spec, features, matrix_target(Ht.get()));
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  std::shared_ptr<Matrix> md = modified_drift(diff);
  ProjectionEstimate proj_md = fit_optional_projection(n, grid, spec, features,
                                                       matrix_target(md.get()));
  NotAdaptedResult res = notadapted_characteristics(n, grid, sc, proj_md, h, features, md.get());
  CharacteristicReport oracle = model.f_oracle(grid);
  std::vector<double> h_orc = model.h_oracle(grid);
  CurveEstimate emp_b = drift_estimate(bundle, "X");

  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", res.report.first[k], res.report.first_se[k],
            oracle.first[k]);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp_b.value[k], emp_b.se[k], oracle.first[k]);
    add_row(rep, ctx, t, "C^F [engine|oracle]", res.report.second[k], res.report.second_se[k],
            oracle.second[k]);
    const auto& eng_atoms = res.report.jump_compensator.ac_part[k];
    const auto& orc_atoms = oracle.jump_compensator.ac_part[k];
    double eng_lam = 0.0, orc_lam = 0.0;
    for (const auto& a : eng_atoms) eng_lam += a.intensity;
    for (const auto& a : orc_atoms) orc_lam += a.intensity;
    add_row(rep, ctx, t, "nu^F intensity [engine|oracle]", eng_lam, 0.0, orc_lam);
    if (!orc_atoms.empty()) {
      double driver_mark = sc.driver->jump_compensator.ac_part[k][0].dist.mean();
      double eng_mark = eng_atoms.empty() ? 0.0 : eng_atoms[0].dist.mean();
      add_row(rep, ctx, t, "nu^F mark [engine|oracle]", eng_mark,
              std::abs(driver_mark) * h.se[k], orc_atoms[0].dist.mean());
    }
  }

  // empirical second characteristic for the Brownian-observation case: project
  // one-step increments of X on one-step increments of W with two independent
  // half-sample fits, rebuild both paths, and take their realized covariation
  // (the cross product cancels the fit noise that realized_qv would square)
  if (scase == models::StructureCase::C) {
    const Matrix& x = bundle.series("X");
    const Matrix& w = bundle.series("W");
    auto dw_features = [&](std::size_t p, std::size_t k, double* out) {
      out[0] = k == 0 ? 0.0 : w.at(p, k) - w.at(p, k - 1);
    };
    auto dx_target = [&](std::size_t p, std::size_t k) {
      return k == 0 ? 0.0 : x.at(p, k) - x.at(p, k - 1);
    };
    std::size_t n2 = n / 2;
    FeatureSpec dspec{{FeatureDef{FeatureKind::Continuous, 64}}};
    ProjectionEstimate estA = fit_optional_projection(n2, grid, dspec, dw_features, dx_target);
    ProjectionEstimate estB = fit_optional_projection(
        n - n2, grid, dspec,
        [&](std::size_t p, std::size_t k, double* out) { dw_features(p + n2, k, out); },
        [&](std::size_t p, std::size_t k) { return dx_target(p + n2, k); });
    Matrix projA(n, grid.size()), projB(n, grid.size());
    double fbuf[2];
    for (std::size_t p = 0; p < n; ++p) {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 1; k < grid.size(); ++k) {
        dw_features(p, k, fbuf);
        a += estA.eval(k, fbuf);
        b += estB.eval(k, fbuf);
        projA.at(p, k) = a;
        projB.at(p, k) = b;
      }
    }
    CurveEstimate cross = realized_cross_qv(projA, projB, grid);
    for (std::size_t k : quarter_indices(grid))
      add_row(rep, ctx, grid.time(k), "C^F [empirical|oracle]", cross.value[k], cross.se[k],
              oracle.second[k]);
    rep.plots.push_back(curve_plot("C_F", grid, cross.value, cross.se, oracle.second));
  }

  rep.extras["h_mid_engine"] = h.mean[grid.steps / 2];
  rep.extras["h_mid_oracle"] = h_orc[grid.steps / 2];
  rep.plots.push_back(curve_plot("B_F", grid, res.report.first, res.report.first_se, oracle.first));
  if (scase == models::StructureCase::A || scase == models::StructureCase::B) {
    PlotSeries plot;
    plot.quantity_slug = "nuF_mark";
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const auto& eng_atoms = res.report.jump_compensator.ac_part[k];
      const auto& orc_atoms = oracle.jump_compensator.ac_part[k];
      if (orc_atoms.empty()) continue;
      double driver_mark = sc.driver->jump_compensator.ac_part[k][0].dist.mean();
      double mc = eng_atoms.empty() ? 0.0 : eng_atoms[0].dist.mean();
      double band = 3.0 * std::abs(driver_mark) * h.se[k];
      plot.points.push_back({grid.time(k), mc, orc_atoms[0].dist.mean(), mc - band, mc + band});
    }
    rep.plots.push_back(std::move(plot));
  }
  return rep;
}

inline ExperimentReport run_structure_a(const ExperimentContext& ctx) {
  return run_structure(ctx, models::StructureCase::A, "structure_a", 0.5, 0.2, 0.3, 0.0, 0.4, 0.25,
                       100, 50000);
}
inline ExperimentReport run_structure_b(const ExperimentContext& ctx) {
  return run_structure(ctx, models::StructureCase::B, "structure_b", 1.0, 0.3, 0.2, 0.0, 0.6, 0.3,
                       100, 50000);
}
inline ExperimentReport run_structure_c(const ExperimentContext& ctx) {
  return run_structure(ctx, models::StructureCase::C, "structure_c", 1.0, 0.25, 0.4, 0.3, 0.5, 0.0,
                       100, 50000);
}
inline ExperimentReport run_structure_d(const ExperimentContext& ctx) {
  return run_structure(ctx, models::StructureCase::D, "structure_d", 1.0, 1.0, 0.0, 0.0, 1.0, 0.0,
                       50, 100000);
}

inline ExperimentReport run_coarse_brownian(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "coarse_brownian";
  auto [model, grid, n] = coarse_brownian_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  std::vector<std::size_t> atoms = model.atom_indices(grid);
  const Matrix& x = bundle.series("X");
  std::vector<std::vector<double>> marks = atomic_marks(x, atoms);
  CharacteristicReport oracle = model.f_oracle(grid);

  // the coarse observer's path: held at the last block boundary
  Matrix held(n, grid.size());
  std::vector<JumpEvent> jumps;
  jumps.reserve(n * atoms.size());
  {
    std::size_t next = 0;
    double hold = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      next = 0;
      hold = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (next < atoms.size() && k == atoms[next]) {
          hold = x.at(p, k);
          ++next;
        }
        held.at(p, k) = hold;
      }
    }
    for (std::size_t i = 0; i < atoms.size(); ++i)
      for (std::size_t p = 0; p < n; ++p)
        jumps.push_back({p, atoms[i], grid.time(atoms[i]), marks[i][p]});
  }
  CurveEstimate emp_b = drift_estimate(held, jumps, grid);

  nlohmann::json ks = nlohmann::json::array();
  double sd_marks = std::sqrt(model.block());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    double t = grid.time(atoms[i]);
    MeanVar mv = mean_var(marks[i]);
    add_row(rep, ctx, t, "nu^F mark [empirical|oracle]", mv.mean, mv.stderr_mean(), 0.0);
    double sd = std::sqrt(mv.var);
    double se_sd = sd / std::sqrt(2.0 * (static_cast<double>(n) - 1.0));
    add_row(rep, ctx, t, "nu^F mark [empirical-sd|oracle]", sd, se_sd, sd_marks);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp_b.value[atoms[i]], emp_b.se[atoms[i]], 0.0);
    double d = ks_statistic(marks[i], [&](double v) { return normal_cdf(v / sd_marks); });
    ks.push_back(d);
  }
  rep.extras["ks_statistics"] = std::move(ks);
  rep.extras["ks_critical_1pct"] = ks_critical(n, 0.01);
  rep.extras["atomic_oracle_atoms"] = oracle.jump_compensator.atomic_part.size();

  {
    PlotSeries plot;
    plot.quantity_slug = "nuF_mark";
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      MeanVar mv = mean_var(marks[i]);
      double se = mv.stderr_mean();
      plot.points.push_back({grid.time(atoms[i]), mv.mean, 0.0, mv.mean - 3 * se, mv.mean + 3 * se});
    }
    rep.plots.push_back(std::move(plot));
  }
  return rep;
}

inline ExperimentReport run_random_time_indep(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "random_time_indep";
  auto [model, grid, n] = random_time_indep_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  ShrinkageCase sc = model.shrinkage_case(grid);
  FeatureFn features = series_features(bundle, {"W"});
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous,
                               static_cast<int>(ctx.cfg.get_size("bins", bins_for(n)))}}};
  std::shared_ptr<Matrix> md = modified_drift(diff);
  ProjectionEstimate proj_md = fit_optional_projection(n, grid, spec, features,
                                                       matrix_target(md.get()));
  HCoefficient h = h_coefficient(n, grid, sc, spec, features,
                                 [](std::size_t, std::size_t) { return 0.0; });
  NotAdaptedResult res = notadapted_characteristics(n, grid, sc, proj_md, h, features, md.get());
  CharacteristicReport oracle = model.f_oracle(grid);
  CurveEstimate emp = drift_estimate(bundle, "X");

  bool c_zero = true;
  for (double v : res.report.second) c_zero = c_zero && v == 0.0;
  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", res.report.first[k], res.report.first_se[k],
            oracle.first[k]);
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp.value[k], emp.se[k], oracle.first[k]);
    add_row(rep, ctx, t, "C^F [engine|oracle]", res.report.second[k], 0.0, 0.0);
    double eng_lam = 0.0;
    for (const auto& a : res.report.jump_compensator.ac_part[k]) eng_lam += a.intensity;
    add_row(rep, ctx, t, "nu^F intensity [engine|oracle]", eng_lam, 0.0, 0.0);
  }
  rep.extras["c_exactly_zero"] = c_zero;
  rep.plots.push_back(
      curve_plot("B_F", grid, res.report.first, res.report.first_se, oracle.first));
  return rep;
}

inline ExperimentReport run_random_time_gauss(const ExperimentContext& ctx) {
  ExperimentReport rep;
  rep.name = "random_time_gauss";
  auto [model, grid, n] = random_time_gauss_setup(ctx);
  PathBundle bundle = model.simulate(grid, n, ctx.seed);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  FeatureFn features = series_features(bundle, {"W"});
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous,
                               static_cast<int>(ctx.cfg.get_size("bins", bins_for(n)))}}};
  ProjectionEstimate proj_b =
      fit_optional_projection(n, grid, spec, features, [&](std::size_t p, std::size_t k) {
        return diff.drift_at(p, k);
      });
  CurveEstimate engine_b = adapted_first_characteristic(diff, proj_b, features);
  CurveEstimate emp = drift_estimate(bundle, "X");

  // bracket of the projected indicator: realized variation of the martingale
  // part of the survival process against the integrated closed-form bracket
  // density; the compensator is restored before squaring, otherwise its
  // squared increments bias the sum upward by O(dt)
  const Matrix& w = bundle.series("W");
  Matrix m_series(n, grid.size());
  std::vector<double> c_oracle(grid.size(), 0.0), c_oracle_se(grid.size(), 0.0);
  {
    std::vector<double> acc(n, 0.0), prev(n), comp(n, 0.0), prev_a(n);
    for (std::size_t p = 0; p < n; ++p) {
      m_series.at(p, 0) = model.azema(w.at(p, 0), grid.time(0));
      prev[p] = model.c_density(w.at(p, 0), grid.time(0));
      prev_a[p] = model.alpha_tt(w.at(p, 0), grid.time(0));
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
      KahanSum s;
      for (std::size_t p = 0; p < n; ++p) {
        double t = grid.time(k), wv = w.at(p, k);
        double cur_a = model.alpha_tt(wv, t);
        comp[p] += 0.5 * (prev_a[p] + cur_a) * grid.dt();
        prev_a[p] = cur_a;
        m_series.at(p, k) = model.azema(wv, t) + comp[p];
        double cur = model.c_density(wv, t);
        acc[p] += 0.5 * (prev[p] + cur) * grid.dt();
        prev[p] = cur;
        s.add(acc[p]);
      }
      double m = s.value() / static_cast<double>(n);
      KahanSum q;
      for (std::size_t p = 0; p < n; ++p) q.add((acc[p] - m) * (acc[p] - m));
      c_oracle[k] = m;
      c_oracle_se[k] = std::sqrt(q.value() / n / static_cast<double>(n));
    }
  }
  CurveEstimate qv = realized_qv(m_series, grid);

  for (std::size_t k : quarter_indices(grid)) {
    double t = grid.time(k);
    add_row(rep, ctx, t, "B^F [engine|oracle]", engine_b.value[k], engine_b.se[k], model.cdf(t));
    add_row(rep, ctx, t, "B^F [empirical|oracle]", emp.value[k], emp.se[k], model.cdf(t));
    double se_c = std::sqrt(qv.se[k] * qv.se[k] + c_oracle_se[k] * c_oracle_se[k]);
    add_row(rep, ctx, t, "C^F [empirical|oracle]", qv.value[k], se_c, c_oracle[k]);
  }
  std::vector<double> cdf_curve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) cdf_curve[k] = model.cdf(grid.time(k));
  rep.plots.push_back(curve_plot("B_F", grid, engine_b.value, engine_b.se, cdf_curve));
  rep.plots.push_back(curve_plot("C_F", grid, qv.value, qv.se, c_oracle));
  return rep;
}

}  // namespace detail

inline const std::vector<ExperimentDef>& experiment_registry() {
  static const std::vector<ExperimentDef> defs = {
      {"two_defaults", "two default times, intensity regime switch at the partner default",
       detail::run_two_defaults},
      {"poisson_pair", "thinned pair of Poisson streams with a common-jump component",
       detail::run_poisson_pair},
      {"biv_diffusion", "two-factor diffusion with a hidden volatility mixing angle",
       detail::run_biv_diffusion},
      {"structure_a", "structure-equation solution observed directly, pure-jump regime",
       detail::run_structure_a},
      {"structure_b", "jump diffusion observed through its counting process",
       detail::run_structure_b},
      {"structure_c", "jump diffusion observed through its Brownian driver",
       detail::run_structure_c},
      {"structure_d", "Poisson path projected onto an independent Brownian observer",
       detail::run_structure_d},
      {"coarse_brownian", "Brownian path observed on a coarse periodic grid",
       detail::run_coarse_brownian},
      {"random_time_indep", "indicator of an independent exponential time with a Brownian observer",
       detail::run_random_time_indep},
      {"random_time_gauss", "indicator of a lognormal functional of the terminal Brownian value",
       detail::run_random_time_gauss},
  };
  return defs;
}

inline const ExperimentDef* find_experiment(const std::string& name) {
  for (const auto& def : experiment_registry())
    if (def.name == name) return &def;
  return nullptr;
}

inline std::vector<ExperimentReport> run_selected(const Config& root, std::uint64_t seed,
                                                  const std::vector<std::string>& only) {
  std::vector<const ExperimentDef*> defs;
  if (only.empty()) {
    for (const auto& def : experiment_registry()) defs.push_back(&def);
  } else {
    for (const auto& name : only) {
      const ExperimentDef* def = find_experiment(name);
      if (!def) throw ConfigError("unknown experiment: " + name);
      defs.push_back(def);
    }
  }
  std::vector<ExperimentReport> reports;
  reports.reserve(defs.size());
  for (const ExperimentDef* def : defs) {
    ExperimentContext ctx;
    ctx.cfg = root.scoped(def->name);
    ctx.seed = seed;
    ctx.se_mult = ctx.cfg.get_double("se_multiplier", 3.0);
    ctx.rel_tol = ctx.cfg.get_double("rel_tol", 0.01);
    auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep = def->run(ctx);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.scenario = def->scenario;
    reports.push_back(std::move(rep));
  }
  return reports;
}

// paths for one experiment without the comparison machinery: per-series
// cross-path mean and standard deviation curves
inline void simulate_only(const Config& root, const std::string& experiment, std::uint64_t seed,
                          const std::string& out_dir) {
  const ExperimentDef* def = find_experiment(experiment);
  if (!def) throw ConfigError("unknown experiment: " + experiment);
  ExperimentContext ctx;
  ctx.cfg = root.scoped(experiment);
  ctx.seed = seed;

  PathBundle bundle = [&]() -> PathBundle {
    using models::StructureCase;
    if (experiment == "two_defaults") {
      auto s = detail::two_defaults_setup(ctx);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "poisson_pair") {
      auto s = detail::poisson_pair_setup(ctx);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "biv_diffusion") {
      auto s = detail::biv_diffusion_setup(ctx);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "structure_a") {
      auto s = detail::structure_setup(ctx, StructureCase::A, 0.5, 0.2, 0.3, 0.0, 0.4, 0.25, 100,
                                       50000);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "structure_b") {
      auto s = detail::structure_setup(ctx, StructureCase::B, 1.0, 0.3, 0.2, 0.0, 0.6, 0.3, 100,
                                       50000);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "structure_c") {
      auto s = detail::structure_setup(ctx, StructureCase::C, 1.0, 0.25, 0.4, 0.3, 0.5, 0.0, 100,
                                       50000);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "structure_d") {
      auto s = detail::structure_setup(ctx, StructureCase::D, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 50,
                                       100000);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "coarse_brownian") {
      auto s = detail::coarse_brownian_setup(ctx);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    if (experiment == "random_time_indep") {
      auto s = detail::random_time_indep_setup(ctx);
      return s.model.simulate(s.grid, s.n_paths, seed);
    }
    auto s = detail::random_time_gauss_setup(ctx);
    return s.model.simulate(s.grid, s.n_paths, seed);
  }();

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / ("paths_" + experiment + ".csv"));
  if (!csv) throw std::runtime_error("cannot write paths summary under " + out_dir);
  csv << "series,t,mean,sd\n";
  const TimeGrid& grid = bundle.grid();
  std::vector<double> col(bundle.n_paths());
  for (const auto& [name, m] : bundle.all_series()) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (std::size_t p = 0; p < m.n_paths; ++p) col[p] = m.at(p, k);
      MeanVar mv = mean_var(col);
      csv << name << ',' << detail::fmt(grid.time(k)) << ',' << detail::fmt(mv.mean) << ','
          << detail::fmt(std::sqrt(mv.var)) << '\n';
    }
  }
}

}  // namespace filtrage::harness
