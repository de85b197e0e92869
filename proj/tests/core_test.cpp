#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/random.hpp"
#include "filtrage/time_grid.hpp"
#include "filtrage/truncation.hpp"
#include "support/quadrature.hpp"

using namespace filtrage;

TEST(TimeGrid, BasicLayout) {
  TimeGrid grid(2.0, 100);
  EXPECT_EQ(grid.size(), 101u);
  EXPECT_DOUBLE_EQ(grid.dt(), 0.02);
  EXPECT_DOUBLE_EQ(grid.time(0), 0.0);
  EXPECT_DOUBLE_EQ(grid.time(100), 2.0);
  EXPECT_THROW(TimeGrid(0.0, 10), std::invalid_argument);
  EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST(TimeGrid, IndexAtOrAfter) {
  TimeGrid grid(1.0, 100);
  EXPECT_EQ(grid.index_at_or_after(0.0), 0u);
  EXPECT_EQ(grid.index_at_or_after(0.5), 50u);   // lands exactly on a node
  EXPECT_EQ(grid.index_at_or_after(0.501), 51u); // strictly inside a cell
  EXPECT_EQ(grid.index_at_or_after(1.0), 100u);
  EXPECT_EQ(grid.index_at_or_after(5.0), 100u);  // clamped to the last node
}

TEST(SplitRng, ReproducibleStreams) {
  SplitRng a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  bool any_diff = false;
  SplitRng a2(42, 7);
  for (int i = 0; i < 100; ++i) any_diff = any_diff || (a2.next_u64() != c.next_u64());
  EXPECT_TRUE(any_diff);
}

TEST(SplitRng, MomentsAndRange) {
  SplitRng rng(123, 0);
  const int n = 200000;
  KahanSum su, sn, sn2, se;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    su.add(u);
    double z = rng.normal();
    sn.add(z);
    sn2.add(z * z);
    se.add(rng.exponential(2.0));
  }
  double band = 4.0 / std::sqrt(double(n));
  EXPECT_NEAR(su.value() / n, 0.5, band * 0.29);
  EXPECT_NEAR(sn.value() / n, 0.0, band);
  EXPECT_NEAR(sn2.value() / n, 1.0, band * std::sqrt(2.0));
  EXPECT_NEAR(se.value() / n, 0.5, band * 0.5);
}

TEST(Numerics, KahanBeatsDrift) {
  KahanSum s;
  for (int i = 0; i < 10000000; ++i) s.add(0.1);
  EXPECT_NEAR(s.value(), 1000000.0, 1e-6);
}

TEST(Numerics, MeanVarKnownSample) {
  MeanVar mv = mean_var({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(mv.mean, 2.5);
  EXPECT_DOUBLE_EQ(mv.var, 1.25);
  EXPECT_EQ(mv.count, 4);
}

TEST(Numerics, NormalFunctions) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.0) + normal_cdf(-1.0), 1.0, 1e-15);
  double mass = testsupport::romberg([](double x) { return normal_pdf(x); }, -10.0, 10.0);
  EXPECT_NEAR(mass, 1.0, 1e-10);
}

TEST(Numerics, SimpsonAgreesWithRomberg) {
  auto f = [](double x) { return std::exp(-x) * std::cos(3.0 * x); };
  EXPECT_NEAR(simpson(f, 0.0, 2.0, 512), testsupport::romberg(f, 0.0, 2.0), 1e-9);
  EXPECT_NEAR(simpson([](double x) { return x * x; }, 0.0, 1.0, 16), 1.0 / 3.0, 1e-12);
}

// mean of the mark distribution restricted to |x| > 1, checked against raw
// quadrature of the Gaussian density
TEST(Numerics, GaussianBigJumpMeanMatchesQuadrature) {
  for (double mu : {0.0, 0.4, 1.7}) {
    for (double sig : {0.5, 1.0, 2.0}) {
      auto integrand = [&](double x) { return x * normal_pdf((x - mu) / sig) / sig; };
      double lo = mu - 12.0 * sig, hi = mu + 12.0 * sig;
      double want = (lo < -1.0 ? testsupport::romberg(integrand, lo, -1.0) : 0.0) +
                    (hi > 1.0 ? testsupport::romberg(integrand, 1.0, hi) : 0.0);
      EXPECT_NEAR(gaussian_big_jump_mean(mu, sig), want, 1e-9);
    }
  }
}

TEST(Numerics, KsStatistic) {
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back((i + 0.5) / 1000.0);
  double d = ks_statistic(xs, [](double x) { return x; });
  EXPECT_LT(d, 0.002);
  EXPECT_NEAR(ks_critical(10000, 0.01), 1.628 / 100.0, 2e-4);
}

TEST(PathBundle, SeriesAndJumps) {
  TimeGrid grid(1.0, 10);
  PathBundle bundle(grid, 3, 9);
  Matrix& x = bundle.add_series("X");
  EXPECT_THROW(bundle.add_series("X"), std::invalid_argument);
  EXPECT_THROW(bundle.series("nope"), std::out_of_range);
  x.at(2, 10) = 5.0;
  EXPECT_DOUBLE_EQ(bundle.series("X").at(2, 10), 5.0);
  bundle.add_jump("X", {2, 4, 0.33, 2.5});
  EXPECT_EQ(bundle.jumps("X").size(), 1u);
  EXPECT_TRUE(bundle.jumps("unjumped").empty());
}

TEST(PathBundle, CutoffProcessRemovesBigMarks) {
  TimeGrid grid(1.0, 4);
  PathBundle bundle(grid, 1, 0);
  Matrix& x = bundle.add_series("X");
  for (std::size_t k = 0; k <= 4; ++k) x.at(0, k) = 1.0 + double(k);  // starts at 1
  bundle.add_jump("X", {0, 2, 0.4, 2.5});  // big: chi removes 2.5
  bundle.add_jump("X", {0, 3, 0.6, 0.5});  // small: untouched
  Matrix out = cutoff_process(bundle, "X");
  EXPECT_DOUBLE_EQ(out.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(out.at(0, 2), 2.0 - 2.5);
  EXPECT_DOUBLE_EQ(out.at(0, 4), 4.0 - 2.5);
}

TEST(Truncation, PinnedCutoff) {
  TruncationPolicy chi;
  EXPECT_DOUBLE_EQ(chi(0.7), 0.7);
  EXPECT_DOUBLE_EQ(chi(-1.0), -1.0);
  EXPECT_DOUBLE_EQ(chi(1.001), 0.0);
  EXPECT_TRUE(chi.is_big(-3.0));
  EXPECT_FALSE(chi.is_big(0.2));
}
