#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace apfl {

inline constexpr double kPi = std::numbers::pi;

/// Wrap an angle into [-pi, pi).
inline double wrap_angle(double phi) {
  double w = std::remainder(phi, 2.0 * kPi);
  if (w >= kPi) w -= 2.0 * kPi;
  if (w < -kPi) w += 2.0 * kPi;
  return w;
}

/// Planar robot pose. phi is kept in [-pi, pi) by every operation that writes it.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;

  /// Compose this pose with a delta expressed in this pose's frame.
  Pose compose(double dx, double dy, double dphi) const {
    const double c = std::cos(phi), s = std::sin(phi);
    return Pose{x + c * dx - s * dy, y + s * dx + c * dy, wrap_angle(phi + dphi)};
  }

  /// Express a world point in this pose's frame.
  void to_local(double wx, double wy, double& lx, double& ly) const {
    const double c = std::cos(phi), s = std::sin(phi);
    const double tx = wx - x, ty = wy - y;
    lx = c * tx + s * ty;
    ly = -s * tx + c * ty;
  }
};

/// Deterministic random stream. Wraps mt19937_64 with explicitly specified
/// uniform and Gaussian transforms so sequences are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 1) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  double normal(double mean, double stddev) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + stddev * cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * kPi * u2);
    have_cached_ = true;
    return mean + stddev * r * std::cos(2.0 * kPi * u2);
  }

  /// Derive an independent stream keyed by id; repeated calls with the same
  /// id yield the same stream. Does not advance this stream.
  Rng fork(std::uint64_t stream_id) const {
    return Rng(state_ ^ (stream_id * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace apfl
