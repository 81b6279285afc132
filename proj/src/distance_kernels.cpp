#include "lnbnn/distance_kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace lnbnn::kernels {

float l2sqr_scalar(const float* a, const float* b, std::size_t dim) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < dim; ++i) {
    const float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

namespace {

bool cpu_has(Kind kind) {
  switch (kind) {
    case Kind::scalar:
      return true;
    case Kind::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Kind::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

L2SqrFn fn_for(Kind kind) {
  switch (kind) {
    case Kind::scalar:
      return &l2sqr_scalar;
#if defined(__x86_64__) || defined(_M_X64)
    case Kind::avx2:
      return &l2sqr_avx2;
#endif
#if defined(__aarch64__)
    case Kind::neon:
      return &l2sqr_neon;
#endif
    default:
      return &l2sqr_scalar;
  }
}

struct Dispatch {
  std::atomic<Kind> kind;
  std::atomic<L2SqrFn> fn;

  Dispatch() {
    Kind best = Kind::scalar;
    if (cpu_has(Kind::avx2)) best = Kind::avx2;
    if (cpu_has(Kind::neon)) best = Kind::neon;
    kind.store(best, std::memory_order_relaxed);
    fn.store(fn_for(best), std::memory_order_relaxed);
  }
};

Dispatch& dispatch() {
  static Dispatch d;
  return d;
}

}  // namespace

std::string_view name(Kind kind) {
  switch (kind) {
    case Kind::scalar:
      return "scalar";
    case Kind::avx2:
      return "avx2";
    case Kind::neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Kind> available() {
  std::vector<Kind> kinds{Kind::scalar};
  if (cpu_has(Kind::avx2)) kinds.push_back(Kind::avx2);
  if (cpu_has(Kind::neon)) kinds.push_back(Kind::neon);
  return kinds;
}

bool select(Kind kind) {
  if (!cpu_has(kind)) return false;
  dispatch().kind.store(kind, std::memory_order_relaxed);
  dispatch().fn.store(fn_for(kind), std::memory_order_relaxed);
  return true;
}

void select_best() {
  Kind best = Kind::scalar;
  if (cpu_has(Kind::avx2)) best = Kind::avx2;
  if (cpu_has(Kind::neon)) best = Kind::neon;
  select(best);
}

Kind active() { return dispatch().kind.load(std::memory_order_relaxed); }

L2SqrFn active_l2sqr() {
  return dispatch().fn.load(std::memory_order_relaxed);
}

}  // namespace lnbnn::kernels
