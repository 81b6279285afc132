#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace lnbnn::kernels {

/// Squared Euclidean distance between two float vectors of length `dim`.
/// Pointers need no particular alignment.
using L2SqrFn = float (*)(const float* a, const float* b, std::size_t dim);

// Scalar reference kernel. Always available; the baseline every SIMD
// variant is equivalence-tested against.
float l2sqr_scalar(const float* a, const float* b, std::size_t dim);

#if defined(__x86_64__) || defined(_M_X64)
// AVX2+FMA variant, compiled in its own translation unit with -mavx2 -mfma.
// Callable only when the CPU reports AVX2 support (see select()).
float l2sqr_avx2(const float* a, const float* b, std::size_t dim);
#endif

#if defined(__aarch64__)
// NEON variant; NEON is mandatory on AArch64.
float l2sqr_neon(const float* a, const float* b, std::size_t dim);
#endif

enum class Kind { scalar, avx2, neon };

std::string_view name(Kind kind);

/// Variants compiled into this binary and usable on this CPU.
std::vector<Kind> available();

/// Force a specific kernel. Returns false (and leaves the selection
/// unchanged) when the variant is not available on this machine.
bool select(Kind kind);

/// Pick the fastest available variant. Called implicitly on first use.
void select_best();

Kind active();

/// Function pointer for the active kernel. Hot loops should cache this
/// once instead of calling l2sqr() per pair.
L2SqrFn active_l2sqr();

/// Dispatched squared Euclidean distance.
inline float l2sqr(const float* a, const float* b, std::size_t dim) {
  return active_l2sqr()(a, b, dim);
}

}  // namespace lnbnn::kernels
