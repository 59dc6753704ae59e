#pragma once

#include <cstdint>
#include <complex>
#include <random>

namespace hybridbf {

/// splitmix64 finalizer; bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

/// Counter-based seed derivation: realization i of a dataset gets
/// derive_seed(seed, i), so generation order/parallelism cannot change content.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return hash_combine(seed, counter);
}

/// FNV-1a 64-bit over raw bytes; used for dataset/config/schedule fingerprints.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Deterministic random source. mt19937_64 has a fixed bit stream by
/// standard; the distribution transforms below are hand-rolled so the
/// produced doubles do not depend on the C++ standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard complex Gaussian CN(0,1): independent re/im, variance 1/2 each.
  std::complex<double> cgaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1)) / std::sqrt(2.0);
    const double t = 2.0 * M_PI * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

  /// Real standard normal (one Box-Muller pair per call, spare discarded).
  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double exponential(double mean) {
    return mean <= 0.0 ? 0.0 : -mean * std::log(1.0 - uniform());
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hybridbf
