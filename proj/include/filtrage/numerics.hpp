#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace filtrage {

// Kahan-Babuska compensated accumulator. Bin sums must not depend on the
// order paths are merged in, so every per-bin reduction in the library goes
// through this instead of a bare double.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // population variance of the sample
  long count = 0;
  double stderr_mean() const { return count > 0 ? std::sqrt(var / count) : 0.0; }
};

inline MeanVar mean_var(const std::vector<double>& xs) {
  MeanVar mv;
  mv.count = static_cast<long>(xs.size());
  if (xs.empty()) return mv;
  KahanSum s;
  for (double x : xs) s.add(x);
  mv.mean = s.value() / mv.count;
  KahanSum q;
  for (double x : xs) q.add((x - mv.mean) * (x - mv.mean));
  mv.var = q.value() / mv.count;
  return mv;
}

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// E[X 1{|X| > 1}] for X ~ N(mu, sigma^2). Needed when a Gaussian mark
// distribution feeds the big-jump drift correction.
inline double gaussian_big_jump_mean(double mu, double sigma) {
  if (sigma <= 0.0) return std::abs(mu) > 1.0 ? mu : 0.0;
  double a = (-1.0 - mu) / sigma;
  double b = (1.0 - mu) / sigma;
  double inner = mu * (normal_cdf(b) - normal_cdf(a)) - sigma * (normal_pdf(b) - normal_pdf(a));
  return mu - inner;
}

// Composite Simpson on [a, b]. n is rounded up to the next even number.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 512) {
  if (n < 2) n = 2;
  if (n % 2) ++n;
  double h = (b - a) / n;
  KahanSum s;
  s.add(f(a));
  s.add(f(b));
  for (int i = 1; i < n; ++i) s.add(((i % 2) ? 4.0 : 2.0) * f(a + i * h));
  return s.value() * h / 3.0;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double F = cdf(xs[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

// Asymptotic KS critical value at level alpha: sqrt(-ln(alpha/2)/2) / sqrt(n).
inline double ks_critical(std::size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("ks_critical: n == 0");
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(static_cast<double>(n));
}

inline bool nearly_equal(double a, double b, double rel, double abs_floor = 0.0) {
  double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= std::max(rel * scale, abs_floor);
}

}  // namespace filtrage
