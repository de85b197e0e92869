#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "filtrage/filtrage.hpp"
#include "support/quadrature.hpp"

using namespace filtrage;
using namespace filtrage::models;

namespace {

// iid rows: feature in column 0, target in column 1 of two synthetic series
struct Synthetic {
  TimeGrid grid{1.0, 4};
  Matrix feat;
  Matrix target;
  std::size_t n;

  explicit Synthetic(std::size_t n_paths, std::uint64_t seed) : n(n_paths) {
    feat = Matrix(n, grid.size());
    target = Matrix(n, grid.size());
    for (std::size_t p = 0; p < n; ++p) {
      SplitRng rng(seed, p);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double w = rng.normal();
        feat.at(p, k) = w;
        target.at(p, k) = 2.0 * w + rng.normal();
      }
    }
  }

  FeatureFn features() const {
    const Matrix* m = &feat;
    return [m](std::size_t p, std::size_t k, double* out) { out[0] = m->at(p, k); };
  }
  TargetFn target_fn() const {
    const Matrix* m = &target;
    return [m](std::size_t p, std::size_t k) { return m->at(p, k); };
  }
};

}  // namespace

TEST(Projection, TowerIdentityExact) {
  Synthetic data(20000, 7);
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous, 32}}};
  ProjectionEstimate est = fit_optional_projection(data.n, data.grid, spec, data.features(),
                                                   data.target_fn());
  for (std::size_t k = 0; k < data.grid.size(); ++k) {
    KahanSum raw;
    for (std::size_t p = 0; p < data.n; ++p) raw.add(data.target.at(p, k));
    EXPECT_NEAR(est.grand_mean(k), raw.value() / double(data.n), 1e-12);
  }
}

TEST(Projection, DiscreteBinsAreExact) {
  TimeGrid grid(1.0, 2);
  const std::size_t n = 300;
  Matrix feat(n, grid.size()), target(n, grid.size());
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t k = 0; k < grid.size(); ++k) {
      feat.at(p, k) = double(p % 3);
      target.at(p, k) = 10.0 * double(p % 3) + 1.0;
    }
  FeatureSpec spec{{FeatureDef{FeatureKind::Discrete, 0}}};
  auto est = fit_optional_projection(
      n, grid, spec, [&](std::size_t p, std::size_t k, double* out) { out[0] = feat.at(p, k); },
      [&](std::size_t p, std::size_t k) { return target.at(p, k); });
  for (double v : {0.0, 1.0, 2.0}) {
    double buf[1] = {v};
    EXPECT_DOUBLE_EQ(est.eval(1, buf), 10.0 * v + 1.0);
    EXPECT_DOUBLE_EQ(est.stderr_at(1, buf), 0.0);
    EXPECT_EQ(est.count_at(1, buf), 100);
  }
  // unseen value snaps to the nearest seen one
  double buf[1] = {1.4};
  EXPECT_DOUBLE_EQ(est.eval(1, buf), 11.0);
}

TEST(Projection, PredictableShiftsFeatures) {
  TimeGrid grid(1.0, 3);
  const std::size_t n = 200;
  Matrix feat(n, grid.size());
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t k = 0; k < grid.size(); ++k) feat.at(p, k) = double(k) + double(p % 2);
  FeatureSpec spec{{FeatureDef{FeatureKind::Discrete, 0}}};
  FeatureFn features = [&](std::size_t p, std::size_t k, double* out) { out[0] = feat.at(p, k); };
  // target equals the feature at k-1, so the predictable fit is exact per bin
  TargetFn target = [&](std::size_t p, std::size_t k) {
    return k > 0 ? feat.at(p, k - 1) : feat.at(p, 0);
  };
  auto pred = fit_predictable_projection(n, grid, spec, features, target, {}, 10);
  auto opt = fit_optional_projection(n, grid, spec, features, target, {}, 10);
  EXPECT_EQ(pred.slices()[2].feature_index, 1u);
  EXPECT_EQ(opt.slices()[2].feature_index, 2u);
  double lo[1] = {1.0}, hi[1] = {2.0};
  EXPECT_DOUBLE_EQ(pred.eval(2, lo), 1.0);  // bin value at k-1 reproduced exactly
  EXPECT_DOUBLE_EQ(pred.eval(2, hi), 2.0);
}

TEST(Projection, FallbackToNearestReliableBin) {
  TimeGrid grid(1.0, 1);
  const std::size_t n = 1000;
  // one crowded cluster at 0 and a lone outlier at 10
  auto features = [](std::size_t p, std::size_t, double* out) { out[0] = p == 0 ? 10.0 : 0.0; };
  auto target = [](std::size_t p, std::size_t) { return p == 0 ? 500.0 : 1.0; };
  FeatureSpec spec{{FeatureDef{FeatureKind::Discrete, 0}}};
  auto est = fit_optional_projection(n, grid, spec, features, target, {}, 30);
  double buf[1] = {10.0};
  bool fb = false;
  EXPECT_DOUBLE_EQ(est.eval(1, buf, &fb), 1.0);  // outlier bin unreliable, falls back
  EXPECT_TRUE(fb);
  double buf0[1] = {0.0};
  EXPECT_DOUBLE_EQ(est.eval(1, buf0, &fb), 1.0);
  EXPECT_FALSE(fb);
  EXPECT_EQ(est.slices()[1].unreliable_bins, 1);
}

TEST(Projection, StderrShrinksWithSampleSize) {
  Synthetic small(10000, 3), big(40000, 3);
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous, 8}}};
  auto est_s = fit_optional_projection(small.n, small.grid, spec, small.features(),
                                       small.target_fn());
  auto est_b = fit_optional_projection(big.n, big.grid, spec, big.features(), big.target_fn());
  double buf[1] = {0.0};
  double ratio = est_s.stderr_at(2, buf) / est_b.stderr_at(2, buf);
  EXPECT_GT(ratio, 1.5);
  EXPECT_LT(ratio, 2.7);  // quadrupled sample roughly halves the bin stderr
}

TEST(Projection, CoarseFitIndicesHoldLastSlice) {
  Synthetic data(2000, 5);
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous, 8}}};
  auto est = fit_optional_projection(data.n, data.grid, spec, data.features(), data.target_fn(),
                                     {0, 2, 4});
  EXPECT_EQ(est.slice_for(3).grid_index, 2u);
  EXPECT_EQ(est.slice_for(4).grid_index, 4u);
  EXPECT_THROW(fit_optional_projection(data.n, data.grid, spec, data.features(), data.target_fn(),
                                       {9}),
               std::invalid_argument);
}

// projecting an independent martingale onto the observed bins keeps it
// centered: no bin should show structure
TEST(Projection, MartingalePreservation) {
  StructureModel model(StructureCase::D, [](double) { return 1.0; }, [](double) { return 1.0; },
                       Coefficient{1.0, 0, 0}, Coefficient{0, 0, 0}, Coefficient{1.0, 0, 0});
  TimeGrid grid(1.0, 20);
  const std::size_t n = 40000;
  PathBundle bundle = model.simulate(grid, n, 13);
  const Matrix& mm = bundle.series("M");
  FeatureFn features = series_features(bundle, {"W"});
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous, 16}}};
  auto est = fit_optional_projection(n, grid, spec, features,
                                     [&](std::size_t p, std::size_t k) { return mm.at(p, k); });
  for (std::size_t k : {5u, 10u, 20u}) {
    for (double w : {-1.0, 0.0, 0.8}) {
      double buf[1] = {w * std::sqrt(grid.time(k))};
      EXPECT_LE(std::abs(est.eval(k, buf)), 5.0 * est.stderr_at(k, buf));
    }
  }
}

// fitted on-survival intensity against the quadrature marginal hazard
TEST(Projection, SurvivorBinRecoversMarginalHazard) {
  TwoDefaultsModel model(DefaultsFamily::Fgm, 1.0, 2.0, 0.5);
  TimeGrid grid(1.0, 20);
  const std::size_t n = 50000;
  PathBundle bundle = model.simulate(grid, n, 21);
  DifferentialCharacteristics diff = model.g_characteristics(bundle);
  FeatureFn features = series_features(bundle, {"Y1"});
  auto est = fit_optional_projection(n, grid, model.f_feature_spec(), features,
                                     [&](std::size_t p, std::size_t k) { return diff.drift_at(p, k); });
  double t = 0.5;
  std::size_t k = grid.index_at_or_after(t);
  auto f1 = [&](double v) { return model.joint_density(t, v); };
  double dens = testsupport::romberg_tail(f1, 0.0);
  double surv = 1.0;
  {
    auto marg = [&](double u) {
      return testsupport::romberg_tail([&](double v) { return model.joint_density(u, v); }, 0.0);
    };
    surv -= testsupport::romberg(marg, 0.0, t);
  }
  double buf[1] = {0.0};
  EXPECT_NEAR(est.eval(k, buf), dens / surv, 4.0 * est.stderr_at(k, buf));
}

TEST(Projection, ProjectPathWritesSeries) {
  StructureModel model(StructureCase::D, [](double) { return 1.0; }, [](double) { return 1.0; },
                       Coefficient{1.0, 0, 0}, Coefficient{0, 0, 0}, Coefficient{1.0, 0, 0});
  TimeGrid grid(1.0, 10);
  const std::size_t n = 20000;
  PathBundle bundle = model.simulate(grid, n, 37);
  const Matrix& nn = bundle.series("N");
  FeatureFn features = series_features(bundle, {"W"});
  FeatureSpec spec{{FeatureDef{FeatureKind::Continuous, 16}}};
  auto est = fit_optional_projection(n, grid, spec, features,
                                     [&](std::size_t p, std::size_t k) { return nn.at(p, k); });
  ProjectPathResult res = project_path(bundle, est, features, "proj_N");
  EXPECT_EQ(res.fallback_evals, 0);
  const Matrix& proj = bundle.series("proj_N");
  for (std::size_t k : {5u, 10u}) {
    KahanSum s;
    for (std::size_t p = 0; p < n; ++p) s.add(proj.at(p, k));
    double mean = s.value() / double(n);
    double se = std::sqrt(grid.time(k) / double(n));  // Poisson variance t
    EXPECT_NEAR(mean, grid.time(k), 4.0 * se);
  }
}

TEST(Projection, TwoFeatureGrid) {
  TimeGrid grid(1.0, 1);
  const std::size_t n = 4000;
  auto features = [](std::size_t p, std::size_t, double* out) {
    out[0] = double(p % 2);
    out[1] = double((p / 2) % 2);
  };
  auto target = [](std::size_t p, std::size_t) {
    return double(p % 2) + 10.0 * double((p / 2) % 2);
  };
  FeatureSpec spec{{FeatureDef{FeatureKind::Discrete, 0}, FeatureDef{FeatureKind::Discrete, 0}}};
  auto est = fit_optional_projection(n, grid, spec, features, target);
  double b00[2] = {0.0, 0.0}, b11[2] = {1.0, 1.0};
  EXPECT_DOUBLE_EQ(est.eval(0, b00), 0.0);
  EXPECT_DOUBLE_EQ(est.eval(0, b11), 11.0);
  FeatureSpec bad;  // no feature definitions
  EXPECT_THROW(fit_optional_projection(n, grid, bad, features, target), std::invalid_argument);
}
