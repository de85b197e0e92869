#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "filtrage/filtrage.hpp"
#include "support/quadrature.hpp"

using namespace filtrage;
using namespace filtrage::models;
using testsupport::romberg;
using testsupport::romberg_tail;

namespace {

// marginal density and survival of T1 by raw quadrature of the joint density
double quad_marginal_density(const TwoDefaultsModel& model, double t) {
  double hi = model.family() == DefaultsFamily::UniformSquare ? 1.0 : 0.0;
  auto f = [&](double v) { return model.joint_density(t, v); };
  return hi > 0.0 ? romberg(f, 0.0, hi) : romberg_tail(f, 0.0);
}

double quad_marginal_survival(const TwoDefaultsModel& model, double t) {
  auto f1 = [&](double u) { return quad_marginal_density(model, u); };
  return 1.0 - romberg(f1, 0.0, t);
}

}  // namespace

TEST(TwoDefaults, JointDensityNormalized) {
  for (auto family : {DefaultsFamily::IndependentExponential, DefaultsFamily::UniformSquare,
                      DefaultsFamily::Fgm}) {
    TwoDefaultsModel model(family, 1.0, 2.0, 0.5);
    double hi = family == DefaultsFamily::UniformSquare ? 1.0 : 0.0;
    auto inner = [&](double u) {
      auto f = [&](double v) { return model.joint_density(u, v); };
      return hi > 0.0 ? romberg(f, 0.0, hi) : romberg_tail(f, 0.0);
    };
    double mass = hi > 0.0 ? romberg(inner, 0.0, hi) : romberg_tail(inner, 0.0);
    EXPECT_NEAR(mass, 1.0, 1e-8);
  }
}

// closed-form regime intensities against raw quadrature of the joint density
TEST(TwoDefaults, KappaMatchesQuadrature) {
  TwoDefaultsModel fgm(DefaultsFamily::Fgm, 1.0, 2.0, 0.5);
  for (double s : {0.2, 0.7, 1.3}) {
    // both alive: f-section over v > s divided by the joint survival
    double num = romberg_tail([&](double v) { return fgm.joint_density(s, v); }, s);
    double den = romberg_tail(
        [&](double u) {
          return romberg_tail([&](double v) { return fgm.joint_density(u, v); }, s);
        },
        s);
    EXPECT_NEAR(fgm.kappa(s, s + 1.0, s + 1.0), num / den, 1e-6);
    // partner default known at u < s: conditional hazard of the section at u
    double u = 0.5 * s;
    double cnum = fgm.joint_density(s, u);
    double cden = romberg_tail([&](double y) { return fgm.joint_density(y, u); }, s);
    EXPECT_NEAR(fgm.kappa(s, s + 1.0, u), cnum / cden, 1e-6);
  }
}

TEST(TwoDefaults, ProjectedKappaIsMarginalHazard) {
  for (auto family : {DefaultsFamily::IndependentExponential, DefaultsFamily::UniformSquare,
                      DefaultsFamily::Fgm}) {
    TwoDefaultsModel model(family, 1.0, 2.0, 0.5);
    for (double t : {0.25, 0.5, 0.75}) {
      double hazard = quad_marginal_density(model, t) / quad_marginal_survival(model, t);
      EXPECT_NEAR(model.projected_kappa(t), hazard, 1e-7);
      EXPECT_NEAR(model.marginal_cdf(t), 1.0 - quad_marginal_survival(model, t), 1e-8);
    }
  }
}

TEST(TwoDefaults, SamplerMatchesMargins) {
  TwoDefaultsModel fgm(DefaultsFamily::Fgm, 1.0, 2.0, 0.5);
  const std::size_t n = 100000;
  std::vector<double> t1s(n), t2s(n);
  KahanSum su1, su2, cross;
  for (std::size_t p = 0; p < n; ++p) {
    SplitRng rng(2024, p);
    double t1, t2;
    fgm.sample(rng, t1, t2);
    t1s[p] = t1;
    t2s[p] = t2;
    double u1 = 1.0 - std::exp(-t1), u2 = 1.0 - std::exp(-2.0 * t2);
    su1.add(u1);
    su2.add(u2);
    cross.add(u1 * u2);
  }
  double d1 = ks_statistic(t1s, [](double t) { return 1.0 - std::exp(-t); });
  double d2 = ks_statistic(t2s, [](double t) { return 1.0 - std::exp(-2.0 * t); });
  EXPECT_LT(d1, ks_critical(n, 0.01));
  EXPECT_LT(d2, ks_critical(n, 0.01));
  // FGM dependence: corr(U1, U2) = theta / 3
  double m1 = su1.value() / n, m2 = su2.value() / n;
  double corr = (cross.value() / n - m1 * m2) * 12.0;  // uniform variance is 1/12
  EXPECT_NEAR(corr, 0.5 / 3.0, 4.0 / std::sqrt(double(n)));
}

TEST(TwoDefaults, SimulateConsistentWithJumps) {
  TwoDefaultsModel model(DefaultsFamily::IndependentExponential, 1.0, 2.0);
  TimeGrid grid(1.0, 50);
  PathBundle bundle = model.simulate(grid, 500, 11);
  const Matrix& y1 = bundle.series("Y1");
  for (const JumpEvent& e : bundle.jumps("Y1")) {
    ASSERT_LE(e.time, grid.time(e.index));
    EXPECT_DOUBLE_EQ(y1.at(e.path, e.index), 1.0);
    if (e.index > 0) EXPECT_DOUBLE_EQ(y1.at(e.path, e.index - 1), 0.0);
  }
  EXPECT_THROW(TwoDefaultsModel(DefaultsFamily::UniformSquare).simulate(TimeGrid(1.0, 10), 5, 0),
               std::invalid_argument);
}

TEST(PoissonPair, CountMomentsAndOracle) {
  PoissonPairModel model(1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(model.x_intensity(), 1.5);
  TimeGrid grid(2.0, 40);
  const std::size_t n = 50000;
  PathBundle bundle = model.simulate(grid, n, 3);
  const Matrix& x = bundle.series("X");
  std::vector<double> xs(n);
  for (std::size_t p = 0; p < n; ++p) xs[p] = x.at(p, grid.steps);
  MeanVar mv = mean_var(xs);
  EXPECT_NEAR(mv.mean, 3.0, 4.0 * std::sqrt(3.0 / double(n)));
  EXPECT_NEAR(mv.var, 3.0, 4.0 * 3.0 * std::sqrt(2.0 / double(n)));
  CharacteristicReport oracle = model.f_oracle(grid);
  EXPECT_NEAR(oracle.first[grid.steps], 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(oracle.jump_compensator.ac_part[5][0].dist.mean(), 1.0);
}

// E[cos M_t] for the compensated Poisson, checked against the truncated
// series over the Poisson mass function
TEST(Structure, ExpectedCosCompensatedPoisson) {
  for (double lam_t : {0.3, 1.0, 2.5}) {
    double sum = 0.0, logp = -lam_t;  // log P(N = 0)
    for (int j = 0; j < 200; ++j) {
      sum += std::exp(logp) * std::cos(double(j) - lam_t);
      logp += std::log(lam_t) - std::log1p(double(j));  // advance to P(N = j + 1)
    }
    EXPECT_NEAR(StructureModel::expected_cos_m(lam_t), sum, 1e-10);
  }
}

TEST(Structure, ProjectedCoefficientRules) {
  Coefficient with_m{0.5, 0.0, 0.3};
  Coefficient with_w{0.5, 0.3, 0.0};
  StructureModel case_a(StructureCase::A, [](double) { return 0.5; }, [](double) { return 1.0; },
                        Coefficient{0.1, 0, 0}, Coefficient{0.2, 0, 0}, with_m);
  StructureModel case_c(StructureCase::C, [](double) { return 1.0; }, [](double) { return 1.0; },
                        Coefficient{0.1, 0, 0}, with_m, Coefficient{0.2, 0, 0});
  // hidden Brownian load averages to zero under the jump observer
  EXPECT_DOUBLE_EQ(case_a.projected_coefficient(with_w, 1.3), 0.5);
  // hidden Poisson load averages through E[cos M] under the Brownian observer
  EXPECT_NEAR(case_c.projected_coefficient(with_m, 1.3),
              0.5 + 0.3 * StructureModel::expected_cos_m(1.3), 1e-12);
  EXPECT_THROW(case_a.projected_coefficient(with_m, 1.3), std::invalid_argument);
  EXPECT_THROW(case_c.projected_coefficient(with_w, 1.3), std::invalid_argument);
  // the oracle inherits the rule: kappa loading on cos(M) is observable in A
  EXPECT_THROW(case_a.h_oracle(TimeGrid(1.0, 4)), std::invalid_argument);
}

TEST(Structure, IntensityProfile) {
  StructureModel model(StructureCase::B, [](double) { return 0.5; }, [](double) { return 2.0; },
                       Coefficient{0, 0, 0}, Coefficient{0, 0, 0}, Coefficient{0.5, 0, 0});
  TimeGrid grid(1.0, 10);
  EXPECT_DOUBLE_EQ(model.lambda(0.3), 16.0);  // (alpha/phi)^2
  EXPECT_NEAR(model.cumulative_intensity(grid)[10], 16.0, 1e-12);
  StructureModel diffusive(StructureCase::C, [](double) { return 0.0; },
                           [](double) { return 1.0; }, Coefficient{0, 0, 0},
                           Coefficient{0.3, 0, 0}, Coefficient{0, 0, 0});
  EXPECT_DOUBLE_EQ(diffusive.lambda(0.3), 0.0);
}

TEST(Structure, BracketResidualPureJump) {
  StructureModel model(StructureCase::A, [](double) { return 0.5; }, [](double) { return 1.0; },
                       Coefficient{0.0, 0, 0}, Coefficient{0.0, 0, 0}, Coefficient{0.3, 0, 0});
  TimeGrid grid(1.0, 1000);
  PathBundle bundle = model.simulate(grid, 50, 17);
  EXPECT_LE(structure_equation_residual_worst_path(model, bundle), 10.0 * grid.dt());
}

TEST(Structure, DiffusiveRegimeReducesToBrownian) {
  StructureModel model(StructureCase::C, [](double) { return 0.0; }, [](double) { return 1.0; },
                       Coefficient{0.1, 0, 0}, Coefficient{0.4, 0, 0}, Coefficient{0.0, 0, 0});
  TimeGrid grid(1.0, 200);
  PathBundle bundle = model.simulate(grid, 20, 5);
  const Matrix& v = bundle.series("V");
  const Matrix& w = bundle.series("W");
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t k = 0; k <= 200; ++k) ASSERT_EQ(v.at(p, k), w.at(p, k));
  // Brownian cells: the bracket identity holds on cross-path average, with
  // realized-variance noise of order sqrt(dt) per path
  EXPECT_LE(structure_equation_residual(model, bundle), 20.0 * std::sqrt(grid.dt()) / std::sqrt(20.0));
}

TEST(Structure, CountMatchesIntensity) {
  StructureModel model(StructureCase::B, [](double) { return 1.0; }, [](double) { return 1.0; },
                       Coefficient{0.3, 0, 0}, Coefficient{0.2, 0, 0}, Coefficient{0.6, 0.3, 0});
  TimeGrid grid(1.0, 100);
  const std::size_t n = 20000;
  PathBundle bundle = model.simulate(grid, n, 29);
  const Matrix& nn = bundle.series("N");
  const Matrix& mm = bundle.series("M");
  std::vector<double> ns(n), ms(n);
  for (std::size_t p = 0; p < n; ++p) {
    ns[p] = nn.at(p, grid.steps);
    ms[p] = mm.at(p, grid.steps);
  }
  MeanVar mvn = mean_var(ns), mvm = mean_var(ms);
  EXPECT_NEAR(mvn.mean, 1.0, 4.0 / std::sqrt(double(n)));   // Poisson(1) at t = 1
  EXPECT_NEAR(mvm.mean, 0.0, 4.0 / std::sqrt(double(n)));   // compensated
  EXPECT_NEAR(mvm.var, 1.0, 4.0 * std::sqrt(2.0 / double(n)) + 0.05);
}

TEST(Structure, DriverSpecShapes) {
  TimeGrid grid(1.0, 10);
  StructureModel a(StructureCase::A, [](double) { return 0.5; }, [](double) { return 1.0; },
                   Coefficient{0, 0, 0}, Coefficient{0.2, 0, 0}, Coefficient{0.3, 0, 0});
  DriverSpec da = a.driver_spec(grid);
  EXPECT_DOUBLE_EQ(da.bracket_density[3], 1.0);       // alpha^2
  EXPECT_DOUBLE_EQ(da.cont_bracket_density[3], 0.0);  // pure jump when phi != 0
  EXPECT_DOUBLE_EQ(da.jump_compensator.ac_part[3][0].dist.mean(), 0.5);
  EXPECT_DOUBLE_EQ(da.jump_compensator.ac_part[3][0].intensity, 4.0);
  StructureModel c(StructureCase::C, [](double) { return 1.0; }, [](double) { return 1.0; },
                   Coefficient{0, 0, 0}, Coefficient{0.2, 0, 0}, Coefficient{0.3, 0, 0});
  DriverSpec dc = c.driver_spec(grid);
  EXPECT_DOUBLE_EQ(dc.bracket_density[3], 1.0);
  EXPECT_DOUBLE_EQ(dc.cont_bracket_density[3], 1.0);
  EXPECT_TRUE(dc.jump_compensator.ac_part[3].empty());
  ShrinkageCase sc = c.shrinkage_case(grid);
  EXPECT_TRUE(sc.immersion);
  EXPECT_NO_THROW(sc.validate(grid));
}

TEST(CoarseBrownian, BlocksAndMarks) {
  CoarseBrownianModel model(1.0);
  TimeGrid grid(4.0, 400);
  std::vector<std::size_t> atoms = model.atom_indices(grid);
  ASSERT_EQ(atoms.size(), 4u);
  EXPECT_EQ(atoms[0], 100u);
  EXPECT_EQ(atoms[3], 400u);
  EXPECT_THROW(model.atom_indices(TimeGrid(4.0, 37)), std::invalid_argument);

  const std::size_t n = 20000;
  PathBundle bundle = model.simulate(grid, n, 31);
  std::vector<std::vector<double>> marks = atomic_marks(bundle.series("X"), atoms);
  for (const auto& column : marks) {
    MeanVar mv = mean_var(column);
    EXPECT_NEAR(mv.mean, 0.0, 4.0 / std::sqrt(double(n)));
    EXPECT_NEAR(mv.var, 1.0, 4.0 * std::sqrt(2.0 / double(n)));
  }
  CharacteristicReport oracle = model.f_oracle(grid);
  ASSERT_EQ(oracle.jump_compensator.atomic_part.size(), 4u);
  EXPECT_EQ(oracle.jump_compensator.atomic_part[0].dist.kind, MarkDistribution::Kind::Gaussian);
  EXPECT_DOUBLE_EQ(oracle.jump_compensator.atomic_part[0].dist.a, 0.0);
  EXPECT_DOUBLE_EQ(oracle.jump_compensator.atomic_part[0].dist.b, 1.0);
  EXPECT_DOUBLE_EQ(oracle.first[grid.steps], 0.0);
}

TEST(RandomTime, AlphaDensityNormalizedAndConsistent) {
  RandomTimeGaussModel model(1.0, 2.0);
  for (double w : {-0.8, 0.0, 1.1}) {
    for (double t : {0.3, 0.9}) {
      auto dens = [&](double u) { return model.alpha_density(w, t, u); };
      double mass = romberg_tail(dens, 1e-12, 2.0);
      EXPECT_NEAR(mass, 1.0, 1e-4);
      // survival consistency: azema = mass of the density beyond t
      double tail = romberg_tail(dens, t, 2.0);
      EXPECT_NEAR(model.azema(w, t), tail, 1e-6);
      // squared derivative of the survival in w, by central difference
      double h = 1e-5;
      double dw = (model.azema(w + h, t) - model.azema(w - h, t)) / (2.0 * h);
      EXPECT_NEAR(model.c_density(w, t), dw * dw, 1e-5);
    }
  }
}

TEST(RandomTime, IndepExponentialPaths) {
  RandomTimeIndepModel model(1.0);
  TimeGrid grid(1.0, 100);
  const std::size_t n = 50000;
  PathBundle bundle = model.simulate(grid, n, 41);
  const Matrix& x = bundle.series("X");
  std::size_t defaults = 0;
  for (std::size_t p = 0; p < n; ++p) defaults += x.at(p, grid.steps) > 0.5 ? 1 : 0;
  double frac = double(defaults) / double(n);
  EXPECT_NEAR(frac, model.cdf(1.0), 4.0 * std::sqrt(0.25 / double(n)));
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  for (std::size_t p = 0; p < 50; ++p)
    for (std::size_t k = 0; k <= 100; ++k) {
      double want = x.at(p, k) > 0.5 ? 0.0 : 1.0;
      ASSERT_DOUBLE_EQ(diff.drift_at(p, k), want);
    }
}

TEST(BivariateDiffusion, CoefficientsAndQv) {
  BivariateDiffusionModel model;
  TimeGrid grid(1.0, 500);
  const std::size_t n = 2000;
  PathBundle bundle = model.simulate(grid, n, 59);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  const Matrix& x = bundle.series("X");
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t k = 0; k <= 500; ++k) {
      double xv = x.at(p, k);
      double sig = 0.2 + 0.1 * std::tanh(xv);
      ASSERT_DOUBLE_EQ(diff.drift_at(p, k), -0.1 * xv);
      ASSERT_DOUBLE_EQ(diff.diffusion_at(p, k), sig * sig);
    }
  CharacteristicReport gref = integrate_characteristics(diff);
  CurveEstimate qv = realized_qv(x, grid);
  double combined =
      std::sqrt(qv.se[grid.steps] * qv.se[grid.steps] +
                gref.second_se[grid.steps] * gref.second_se[grid.steps]);
  EXPECT_NEAR(qv.value[grid.steps], gref.second[grid.steps], 4.0 * combined + 0.01);
  EXPECT_THROW(BivariateDiffusionModel(0.1, 0.2, 0.3), std::invalid_argument);
}
