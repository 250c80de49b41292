#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace sdfe {

// Named deterministic random stream. Identical (seed, label) pairs yield
// identical sequences; distinct labels derive statistically independent
// substreams, so per-entity draws do not depend on scheduling order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label)
      : state_(mix(seed ^ mix(fnv1a(label)))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Box-Muller; consumes two uniforms per draw.
  double gaussian(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  // Inverse-CDF Laplace(0, scale).
  double laplace(double scale) {
    const double u = next_double() - 0.5;
    double t = 1.0 - 2.0 * std::fabs(u);
    if (t <= 0.0) t = std::numeric_limits<double>::min();
    const double mag = -scale * std::log(t);
    return u < 0.0 ? -mag : mag;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t state_;
};

}  // namespace sdfe
