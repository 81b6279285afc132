#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace lnbnn {

// Seeded randomness used across index construction and synthetic data.
//
// The engine is std::mt19937_64, whose output sequence is pinned by the
// C++ standard, so it is reproducible across compilers and platforms.
// The standard *distributions* are not (their algorithms are
// implementation-defined), so the helpers below replace them.
using Rng = std::mt19937_64;

/// Derive an independent stream seed (splitmix64 finalizer). Used to give
/// every tree / class / worker its own generator from one top-level seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform double in [0, 1): top 53 bits of one engine output.
inline double uniform_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Fisher-Yates shuffle driven by uniform_below, so the permutation is
/// identical everywhere (std::shuffle is not portable).
template <typename T>
void portable_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

/// Standard normal deviates via the Marsaglia polar method. Generates
/// pairs; the spare is cached between calls.
class NormalSampler {
 public:
  double next(Rng& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform_double(rng) - 1.0;
      v = 2.0 * uniform_double(rng) - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lnbnn
