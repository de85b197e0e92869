#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/time_grid.hpp"

namespace filtrage {

enum class FeatureKind { Discrete, Continuous };

struct FeatureDef {
  FeatureKind kind = FeatureKind::Continuous;
  int bins = 64;  // continuous only; discrete features bin on exact values
};

struct FeatureSpec {
  std::vector<FeatureDef> defs;  // 1 or 2 features
};

// features(p, k, out) writes one value per feature definition
using FeatureFn = std::function<void(std::size_t, std::size_t, double*)>;
using TargetFn = std::function<double(std::size_t, std::size_t)>;

struct BinStats {
  double sum = 0.0;
  double sumsq = 0.0;
  long count = 0;
  double mean = 0.0;
  double se = 0.0;
  bool reliable = false;
};

// Piecewise-constant conditional expectation estimate: one slice per fit
// index, each slice a product binning of the features at that time with the
// bin means of the target. Evaluation between fit indices holds the last
// slice, which matches sub-filtrations that refresh information at the fit
// times and is exact when every grid index is fitted.
class ProjectionEstimate {
 public:
  struct FeatureBinning {
    FeatureKind kind = FeatureKind::Continuous;
    std::vector<double> inner_edges;  // continuous: bins-1 quantile edges
    std::vector<double> values;       // discrete: sorted distinct values
    int n_bins() const {
      return kind == FeatureKind::Continuous ? static_cast<int>(inner_edges.size()) + 1
                                             : static_cast<int>(values.size());
    }
    int locate(double x) const {
      if (kind == FeatureKind::Continuous) {
        auto it = std::upper_bound(inner_edges.begin(), inner_edges.end(), x);
        return static_cast<int>(it - inner_edges.begin());
      }
      auto it = std::lower_bound(values.begin(), values.end(), x);
      if (it != values.end() && *it == x) return static_cast<int>(it - values.begin());
      // unseen value: snap to the nearest known one
      if (it == values.begin()) return 0;
      if (it == values.end()) return static_cast<int>(values.size()) - 1;
      double lo = *(it - 1), hi = *it;
      return (x - lo <= hi - x) ? static_cast<int>(it - values.begin()) - 1
                                : static_cast<int>(it - values.begin());
    }
  };

  struct Slice {
    std::size_t grid_index = 0;     // time the target was fitted at
    std::size_t feature_index = 0;  // time the features were read at
    std::vector<FeatureBinning> binning;
    std::vector<BinStats> bins;     // flat, feature 0 fastest
    std::vector<int> fallback;      // flat bin -> reliable flat bin
    long unreliable_bins = 0;

    int flat_index(const double* feats) const {
      int idx = 0, stride = 1;
      for (std::size_t f = 0; f < binning.size(); ++f) {
        idx += stride * binning[f].locate(feats[f]);
        stride *= binning[f].n_bins();
      }
      return idx;
    }
  };

  const Slice& slice_for(std::size_t k) const {
    // latest fit index <= k
    auto it = std::upper_bound(slices_.begin(), slices_.end(), k,
                               [](std::size_t v, const Slice& s) { return v < s.grid_index; });
    if (it == slices_.begin()) throw std::out_of_range("ProjectionEstimate: no slice at or before index");
    return *(it - 1);
  }

  // fitted value at grid index k for the given feature vector; falls back to
  // the nearest reliable bin and reports whether it did
  double eval(std::size_t k, const double* feats, bool* used_fallback = nullptr) const {
    const Slice& s = slice_for(k);
    int idx = s.flat_index(feats);
    int tgt = s.fallback[idx];
    if (used_fallback) *used_fallback = (tgt != idx) || !s.bins[idx].reliable;
    return s.bins[tgt].mean;
  }

  double stderr_at(std::size_t k, const double* feats) const {
    const Slice& s = slice_for(k);
    return s.bins[s.fallback[s.flat_index(feats)]].se;
  }

  long count_at(std::size_t k, const double* feats) const {
    const Slice& s = slice_for(k);
    return s.bins[s.fallback[s.flat_index(feats)]].count;
  }

  // exact weighted average of the bin means at the slice covering k; equals
  // the raw sample mean of the targets up to rounding (tower property)
  double grand_mean(std::size_t k) const {
    const Slice& s = slice_for(k);
    KahanSum num;
    long den = 0;
    for (const auto& b : s.bins) {
      num.add(b.sum);
      den += b.count;
    }
    if (den == 0) throw std::runtime_error("ProjectionEstimate: empty slice");
    return num.value() / static_cast<double>(den);
  }

  const std::vector<Slice>& slices() const { return slices_; }
  int min_count() const { return min_count_; }

  std::vector<Slice> slices_;
  int min_count_ = 30;
};

namespace detail {

inline void build_fallback(ProjectionEstimate::Slice& s) {
  int n = static_cast<int>(s.bins.size());
  s.fallback.assign(n, -1);
  // decompose flat index into per-feature coordinates once
  std::vector<int> dims;
  for (const auto& fb : s.binning) dims.push_back(fb.n_bins());
  auto coords = [&](int flat, int* out) {
    for (std::size_t f = 0; f < dims.size(); ++f) {
      out[f] = flat % dims[f];
      flat /= dims[f];
    }
  };
  std::vector<int> reliable_list;
  for (int i = 0; i < n; ++i)
    if (s.bins[i].reliable) reliable_list.push_back(i);
  if (reliable_list.empty()) throw std::runtime_error("ProjectionEstimate: all bins unreliable");
  int ca[2] = {0, 0}, cb[2] = {0, 0};
  for (int i = 0; i < n; ++i) {
    if (s.bins[i].reliable) {
      s.fallback[i] = i;
      continue;
    }
    ++s.unreliable_bins;
    coords(i, ca);
    int best = reliable_list.front(), best_d = std::numeric_limits<int>::max();
    for (int r : reliable_list) {
      coords(r, cb);
      int d = 0;
      for (std::size_t f = 0; f < dims.size(); ++f) d += std::abs(ca[f] - cb[f]);
      if (d < best_d) {
        best_d = d;
        best = r;
      }
    }
    s.fallback[i] = best;
  }
}

inline ProjectionEstimate fit_projection_impl(std::size_t n_paths, const TimeGrid& grid,
                                              const FeatureSpec& spec, const FeatureFn& features,
                                              const TargetFn& target,
                                              std::vector<std::size_t> fit_indices, int min_count,
                                              bool predictable) {
  if (spec.defs.empty() || spec.defs.size() > 2)
    throw std::invalid_argument("fit_projection: need 1 or 2 features");
  if (n_paths == 0) throw std::invalid_argument("fit_projection: no paths");
  if (fit_indices.empty()) {
    fit_indices.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) fit_indices[k] = k;
  }
  std::sort(fit_indices.begin(), fit_indices.end());
  fit_indices.erase(std::unique(fit_indices.begin(), fit_indices.end()), fit_indices.end());
  if (fit_indices.back() >= grid.size())
    throw std::invalid_argument("fit_projection: fit index beyond grid");

  ProjectionEstimate est;
  est.min_count_ = min_count;
  est.slices_.reserve(fit_indices.size());

  std::size_t nf = spec.defs.size();
  std::vector<double> fbuf(n_paths * nf);
  std::vector<double> scratch(n_paths);

  for (std::size_t k : fit_indices) {
    ProjectionEstimate::Slice s;
    s.grid_index = k;
    s.feature_index = predictable ? (k > 0 ? k - 1 : 0) : k;

    for (std::size_t p = 0; p < n_paths; ++p) {
      features(p, s.feature_index, &fbuf[p * nf]);
      for (std::size_t f = 0; f < nf; ++f)
        if (!std::isfinite(fbuf[p * nf + f]))
          throw std::runtime_error("fit_projection: non-finite feature");
    }

    for (std::size_t f = 0; f < nf; ++f) {
      ProjectionEstimate::FeatureBinning fb;
      fb.kind = spec.defs[f].kind;
      for (std::size_t p = 0; p < n_paths; ++p) scratch[p] = fbuf[p * nf + f];
      std::sort(scratch.begin(), scratch.end());
      if (fb.kind == FeatureKind::Continuous) {
        int nb = std::max(1, spec.defs[f].bins);
        for (int j = 1; j < nb; ++j) {
          std::size_t pos = static_cast<std::size_t>(static_cast<double>(j) * n_paths / nb);
          if (pos >= n_paths) pos = n_paths - 1;
          fb.inner_edges.push_back(scratch[pos]);
        }
        fb.inner_edges.erase(std::unique(fb.inner_edges.begin(), fb.inner_edges.end()),
                             fb.inner_edges.end());
      } else {
        fb.values.assign(scratch.begin(), std::unique(scratch.begin(), scratch.end()));
      }
      s.binning.push_back(std::move(fb));
    }

    int total = 1;
    for (const auto& fb : s.binning) total *= fb.n_bins();
    std::vector<KahanSum> sums(total), sumsqs(total);
    std::vector<long> counts(total, 0);
    for (std::size_t p = 0; p < n_paths; ++p) {
      double y = target(p, k);
      if (!std::isfinite(y)) throw std::runtime_error("fit_projection: non-finite target");
      int idx = s.flat_index(&fbuf[p * nf]);
      sums[idx].add(y);
      sumsqs[idx].add(y * y);
      ++counts[idx];
    }
    s.bins.resize(total);
    for (int i = 0; i < total; ++i) {
      BinStats& b = s.bins[i];
      b.sum = sums[i].value();
      b.sumsq = sumsqs[i].value();
      b.count = counts[i];
      if (b.count > 0) {
        b.mean = b.sum / static_cast<double>(b.count);
        double var = std::max(0.0, b.sumsq / b.count - b.mean * b.mean);
        b.se = std::sqrt(var / b.count);
      }
      b.reliable = b.count >= min_count;
    }
    build_fallback(s);
    est.slices_.push_back(std::move(s));
  }
  return est;
}

}  // namespace detail

// E[target_k | features_k] per bin: the optional projection estimator.
inline ProjectionEstimate fit_optional_projection(std::size_t n_paths, const TimeGrid& grid,
                                                  const FeatureSpec& spec, const FeatureFn& features,
                                                  const TargetFn& target,
                                                  std::vector<std::size_t> fit_indices = {},
                                                  int min_count = 30) {
  return detail::fit_projection_impl(n_paths, grid, spec, features, target,
                                     std::move(fit_indices), min_count, false);
}

// E[target_k | features_{k-1}]: features shift one grid step back as the left
// limit surrogate, making the fitted value measurable strictly before k.
inline ProjectionEstimate fit_predictable_projection(std::size_t n_paths, const TimeGrid& grid,
                                                     const FeatureSpec& spec,
                                                     const FeatureFn& features, const TargetFn& target,
                                                     std::vector<std::size_t> fit_indices = {},
                                                     int min_count = 30) {
  return detail::fit_projection_impl(n_paths, grid, spec, features, target,
                                     std::move(fit_indices), min_count, true);
}

struct ProjectPathResult {
  std::string series_name;
  long fallback_evals = 0;  // evaluations that landed in an unreliable bin
};

// Evaluate the fitted projection along each path and store it as a new
// series in the bundle.
inline ProjectPathResult project_path(PathBundle& bundle, const ProjectionEstimate& est,
                                      const FeatureFn& features, const std::string& out_name) {
  Matrix& out = bundle.add_series(out_name);
  ProjectPathResult res{out_name, 0};
  double fbuf[2];
  for (std::size_t p = 0; p < bundle.n_paths(); ++p) {
    for (std::size_t k = 0; k < bundle.grid().size(); ++k) {
      const auto& s = est.slice_for(k);
      features(p, s.feature_index, fbuf);
      bool fb = false;
      out.at(p, k) = est.eval(k, fbuf, &fb);
      if (fb) ++res.fallback_evals;
    }
  }
  return res;
}

// convenience: features read straight from bundle series
inline FeatureFn series_features(const PathBundle& bundle, const std::vector<std::string>& names) {
  std::vector<const Matrix*> mats;
  mats.reserve(names.size());
  for (const auto& n : names) mats.push_back(&bundle.series(n));
  return [mats](std::size_t p, std::size_t k, double* out) {
    for (std::size_t f = 0; f < mats.size(); ++f) out[f] = mats[f]->at(p, k);
  };
}

}  // namespace filtrage
