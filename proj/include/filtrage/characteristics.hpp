#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "filtrage/numerics.hpp"
#include "filtrage/path_bundle.hpp"
#include "filtrage/time_grid.hpp"
#include "filtrage/truncation.hpp"

namespace filtrage {

// Mark distribution of a compensator slice. Two descriptors cover every model
// in the catalog: finite point masses and a Gaussian (for the block-sampled
// Brownian marks).
struct MarkDistribution {
  enum class Kind { PointMass, Gaussian };
  Kind kind = Kind::PointMass;
  double a = 0.0;  // PointMass: location. Gaussian: mean.
  double b = 0.0;  // Gaussian: variance.

  static MarkDistribution point(double x) { return {Kind::PointMass, x, 0.0}; }
  static MarkDistribution gaussian(double mean, double var) {
    if (var < 0.0) throw std::invalid_argument("MarkDistribution: variance < 0");
    return {Kind::Gaussian, mean, var};
  }

  double mean() const { return a; }

  double big_jump_mean() const {  // E[X 1{|X| > 1}]
    if (kind == Kind::PointMass) return std::abs(a) > 1.0 ? a : 0.0;
    return gaussian_big_jump_mean(a, std::sqrt(b));
  }

  // image under x -> h x
  MarkDistribution scaled(double h) const {
    if (kind == Kind::PointMass) return point(h * a);
    return gaussian(h * a, h * h * b);
  }
};

struct CompensatorAtom {
  MarkDistribution dist;
  double intensity = 0.0;  // per unit time
};

struct TimeAtom {
  std::size_t index = 0;  // grid index of the fixed time
  double time = 0.0;
  MarkDistribution dist;
};

// nu as the library reports it: an absolutely continuous part (atom list per
// grid point, intensities per unit time, left-endpoint convention) plus
// fixed-time atoms for filtrations that release information in blocks.
struct CompensatorMeasure {
  std::vector<std::vector<CompensatorAtom>> ac_part;
  std::vector<TimeAtom> atomic_part;

  double total_intensity(std::size_t k) const {
    if (k >= ac_part.size()) return 0.0;
    double s = 0.0;
    for (const auto& atom : ac_part[k]) s += atom.intensity;
    return s;
  }

  // integral of x 1{|x| > 1} nu(ds, dx) over [0, t_k), left-endpoint in time
  double big_jump_integral(std::size_t k, const TimeGrid& grid) const {
    KahanSum s;
    for (std::size_t j = 0; j + 1 <= k && j < ac_part.size(); ++j)
      for (const auto& atom : ac_part[j]) s.add(atom.dist.big_jump_mean() * atom.intensity * grid.dt());
    for (const auto& ta : atomic_part)
      if (ta.index <= k && ta.index > 0) s.add(ta.dist.big_jump_mean());
    return s.value();
  }
};

// One layer of a jump kernel: a single atom per (path, grid point). Mark and
// intensity are each constant, a deterministic time profile, or fully
// pathwise, whichever the model needs; every catalog family has at most one
// atom per point and layers stack when more are needed.
struct KernelLayer {
  double mark_value = 0.0;
  std::shared_ptr<const std::vector<double>> mark_profile;
  std::shared_ptr<const Matrix> mark_matrix;
  double intensity_value = 0.0;
  std::shared_ptr<const std::vector<double>> intensity_profile;
  std::shared_ptr<const Matrix> intensity_matrix;

  double mark_at(std::size_t p, std::size_t k) const {
    if (mark_matrix) return mark_matrix->at(p, k);
    if (mark_profile) return (*mark_profile)[k];
    return mark_value;
  }
  double intensity_at(std::size_t p, std::size_t k) const {
    if (intensity_matrix) return intensity_matrix->at(p, k);
    if (intensity_profile) return (*intensity_profile)[k];
    return intensity_value;
  }
};

struct JumpKernelAtom {
  double mark = 0.0;
  double intensity = 0.0;
};

// Differential form of a characteristic triple under the running filtration:
// drift density b a, diffusion density c a and the jump kernel K a, all per
// unit time on the grid. Matrices are shared so a family whose intensity
// coincides with its drift does not pay for the copy.
class DifferentialCharacteristics {
 public:
  DifferentialCharacteristics() = default;
  DifferentialCharacteristics(const TimeGrid& grid, std::size_t n_paths,
                              std::shared_ptr<const Matrix> drift,
                              std::shared_ptr<const Matrix> diffusion,
                              std::vector<KernelLayer> kernel, bool deterministic)
      : grid_(grid),
        n_paths_(n_paths),
        drift_(std::move(drift)),
        diffusion_(std::move(diffusion)),
        kernel_(std::move(kernel)),
        deterministic_(deterministic) {
    if (!drift_) throw std::invalid_argument("DifferentialCharacteristics: drift required");
    check_shape(*drift_, "drift");
    if (diffusion_) check_shape(*diffusion_, "diffusion");
    for (const auto& layer : kernel_) {
      if (layer.mark_matrix) check_shape(*layer.mark_matrix, "kernel mark");
      if (layer.intensity_matrix) check_shape(*layer.intensity_matrix, "kernel intensity");
      if (layer.mark_profile && layer.mark_profile->size() != grid_.size())
        throw std::invalid_argument("DifferentialCharacteristics: kernel mark profile length");
      if (layer.intensity_profile && layer.intensity_profile->size() != grid_.size())
        throw std::invalid_argument("DifferentialCharacteristics: kernel intensity profile length");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t n_paths() const { return n_paths_; }
  bool deterministic() const { return deterministic_; }

  double drift_at(std::size_t p, std::size_t k) const { return drift_->at(p, k); }
  double diffusion_at(std::size_t p, std::size_t k) const {
    return diffusion_ ? diffusion_->at(p, k) : 0.0;
  }
  const std::vector<KernelLayer>& kernel() const { return kernel_; }

  std::vector<JumpKernelAtom> kernel_atoms(std::size_t p, std::size_t k) const {
    std::vector<JumpKernelAtom> out;
    for (const auto& layer : kernel_) {
      double lam = layer.intensity_at(p, k);
      double m = layer.mark_at(p, k);
      if (lam > 0.0 && m != 0.0) out.push_back({m, lam});
    }
    return out;
  }

  // b-hat a: drift density plus the mean of big jumps under the kernel
  double modified_drift_at(std::size_t p, std::size_t k, TruncationPolicy chi = {}) const {
    double v = drift_at(p, k);
    for (const auto& layer : kernel_) {
      double m = layer.mark_at(p, k);
      if (chi.is_big(m)) v += m * layer.intensity_at(p, k);
    }
    return v;
  }

 private:
  void check_shape(const Matrix& m, const char* what) const {
    if (m.n_paths != n_paths_ || m.n_times != grid_.size())
      throw std::invalid_argument(std::string("DifferentialCharacteristics: bad shape for ") + what);
  }

  TimeGrid grid_;
  std::size_t n_paths_ = 0;
  std::shared_ptr<const Matrix> drift_;
  std::shared_ptr<const Matrix> diffusion_;
  std::vector<KernelLayer> kernel_;
  bool deterministic_ = false;
};

// Cumulative triple estimate on the grid, cross-path aggregated, with the
// dispersion of the pathwise trajectories as the standard error.
struct CharacteristicReport {
  TimeGrid grid;
  std::vector<double> first;
  std::vector<double> first_se;
  std::vector<double> second;
  std::vector<double> second_se;
  CompensatorMeasure jump_compensator;
  std::shared_ptr<Matrix> first_paths;   // optional pathwise trajectories
  std::shared_ptr<Matrix> second_paths;
};

namespace detail {

inline void cumulate_mean_se(const std::function<double(std::size_t, std::size_t)>& density,
                             const TimeGrid& grid, std::size_t n_paths, std::vector<double>& out,
                             std::vector<double>& out_se, Matrix* paths) {
  out.assign(grid.size(), 0.0);
  out_se.assign(grid.size(), 0.0);
  std::vector<double> acc(n_paths, 0.0), prev(n_paths);
  double dt = grid.dt();
  for (std::size_t p = 0; p < n_paths; ++p) prev[p] = density(p, 0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    KahanSum s, q;
    for (std::size_t p = 0; p < n_paths; ++p) {
      double cur = density(p, k);  // trapezoid, matching the engine quadrature
      acc[p] += 0.5 * (prev[p] + cur) * dt;
      prev[p] = cur;
      if (paths) paths->at(p, k) = acc[p];
      s.add(acc[p]);
    }
    double m = s.value() / static_cast<double>(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) q.add((acc[p] - m) * (acc[p] - m));
    out[k] = m;
    out_se[k] = n_paths > 1 ? std::sqrt(q.value() / n_paths / static_cast<double>(n_paths)) : 0.0;
  }
}

}  // namespace detail

// Integrate a differential triple into cumulative form. The compensator's
// ac part keeps one atom per kernel layer per grid point; pathwise marks
// collapse to the intensity-weighted cross-path mean, which is exact whenever
// the layer is deterministic (the only case the comparisons rely on).
inline CharacteristicReport integrate_characteristics(const DifferentialCharacteristics& diff,
                                                      bool keep_paths = false) {
  const TimeGrid& grid = diff.grid();
  std::size_t n = diff.n_paths();
  CharacteristicReport rep;
  rep.grid = grid;
  if (keep_paths) {
    rep.first_paths = std::make_shared<Matrix>(n, grid.size());
    rep.second_paths = std::make_shared<Matrix>(n, grid.size());
  }
  detail::cumulate_mean_se([&](std::size_t p, std::size_t k) { return diff.drift_at(p, k); }, grid,
                           n, rep.first, rep.first_se, rep.first_paths.get());
  detail::cumulate_mean_se([&](std::size_t p, std::size_t k) { return diff.diffusion_at(p, k); },
                           grid, n, rep.second, rep.second_se, rep.second_paths.get());

  rep.jump_compensator.ac_part.assign(grid.size(), {});
  for (const auto& layer : diff.kernel()) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      KahanSum lam_sum, weighted_mark;
      for (std::size_t p = 0; p < n; ++p) {
        double lam = layer.intensity_at(p, k);
        lam_sum.add(lam);
        weighted_mark.add(lam * layer.mark_at(p, k));
      }
      double lam_mean = lam_sum.value() / static_cast<double>(n);
      if (lam_mean <= 0.0) continue;
      double mark = weighted_mark.value() / lam_sum.value();
      rep.jump_compensator.ac_part[k].push_back({MarkDistribution::point(mark), lam_mean});
    }
  }
  return rep;
}

}  // namespace filtrage
