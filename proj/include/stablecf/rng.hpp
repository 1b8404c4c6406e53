#pragma once
// Deterministic random number generation.
//
// All stochastic code in this library draws from this generator rather than
// <random> distributions, because the standard library's distribution
// implementations are not required to produce identical streams across
// platforms or library versions.  Every draw here is defined purely in terms
// of IEEE double arithmetic on xoshiro256++ output, so a (seed, stream) pair
// reproduces the same sequence everywhere.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stablecf {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}
}  // namespace detail

// xoshiro256++ with splitmix64 seeding.  `stream` selects a decorrelated
// substream for the same base seed (used for per-replication streams).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) {
    std::uint64_t sm = seed ^ (0x5851f42d4c957f2dULL * (stream + 1));
    for (auto& word : s_) word = detail::splitmix64(sm);
  }

  // Derives an independent generator for substream `stream`.
  Rng split(std::uint64_t stream) const {
    std::uint64_t sm = s_[0] ^ detail::rotl(s_[2], 17) ^
                       (0x9e3779b97f4a7c15ULL * (stream + 0x632be59bd9b4e019ULL));
    Rng r;
    for (auto& word : r.s_) word = detail::splitmix64(sm);
    return r;
  }

  std::uint64_t next_u64() {
    std::uint64_t* s = s_;
    const std::uint64_t result = detail::rotl(s[0] + s[3], 23) + s[0];
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = detail::rotl(s[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1): 53-bit mantissa, zero rejected.
  double uniform() {
    for (;;) {
      double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x < limit) return x % n;
    }
  }

  // Standard normal via Box-Muller (no cached spare, so the draw count per
  // call is fixed and streams stay reproducible under refactoring).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang for shape >= 1; boosted by U^{1/shape} below 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }
  double gamma(double shape, double scale) { return scale * gamma(shape); }

  double chisq(double df) { return 2.0 * gamma(0.5 * df); }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  double student_t(double nu) {
    return normal() / std::sqrt(chisq(nu) / nu);
  }

  std::uint64_t poisson(double lambda) {
    // Inversion for small lambda, normal approximation never needed here
    // (grid sizes are bounded by 50).
    double p = std::exp(-lambda);
    double cum = p;
    double u = uniform();
    std::uint64_t k = 0;
    while (u > cum && k < 1000) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cum += p;
    }
    return k;
  }

 private:
  std::uint64_t s_[4] = {1, 2, 3, 4};
};

}  // namespace stablecf
