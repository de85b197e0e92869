#pragma once

#include <cmath>
#include <cstdint>

namespace filtrage {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based stream: output i of stream s under seed m is
// mix64(base(m, s) + i * golden). Streams derived from distinct path indices
// are independent for practical purposes and a (seed, path) pair always
// reproduces the same sequence bit for bit, regardless of how many paths
// run or in what order they are consumed.
class SplitRng {
 public:
  SplitRng(std::uint64_t seed, std::uint64_t stream)
      : base_(mix64(mix64(seed + kGolden) ^ mix64(stream * kGolden + 0x1F123BB5ULL))) {}

  std::uint64_t next_u64() { return mix64(base_ + (++counter_) * kGolden); }

  // uniform on (0, 1), never returns an endpoint
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace filtrage
