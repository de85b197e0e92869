#pragma once

#include <cmath>

namespace filtrage {

// Standard truncation chi(x) = x 1{|x| <= 1}. The whole library is pinned to
// this choice; characteristics quoted anywhere assume it.
struct TruncationPolicy {
  double cutoff = 1.0;
  double operator()(double x) const { return std::abs(x) <= cutoff ? x : 0.0; }
  bool is_big(double x) const { return std::abs(x) > cutoff; }
};

inline double truncate(double x) { return TruncationPolicy{}(x); }

}  // namespace filtrage
