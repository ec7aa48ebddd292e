#include "ratecate/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace ratecate::kern {

void vexp_scalar(const double*, double*, std::size_t);
double dot_scalar(const double*, const double*, std::size_t);
double wdot_scalar(const double*, const double*, const double*, std::size_t);
double sum_scalar(const double*, std::size_t);
void axpy_scalar(double, const double*, double*, std::size_t);

#if defined(__x86_64__) || defined(_M_X64)
void vexp_avx2(const double*, double*, std::size_t);
double dot_avx2(const double*, const double*, std::size_t);
double wdot_avx2(const double*, const double*, const double*, std::size_t);
double sum_avx2(const double*, std::size_t);
void axpy_avx2(double, const double*, double*, std::size_t);
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {
std::atomic<Backend> g_backend{cpu_has_avx2() ? Backend::avx2 : Backend::scalar};
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

std::string backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2()) {
    throw std::runtime_error("avx2 backend requested but CPU lacks AVX2/FMA");
  }
  g_backend.store(b, std::memory_order_relaxed);
}

void reset_backend() {
  g_backend.store(cpu_has_avx2() ? Backend::avx2 : Backend::scalar,
                  std::memory_order_relaxed);
}

#if defined(__x86_64__) || defined(_M_X64)
#define RC_DISPATCH(fn, ...)                                 \
  return active_backend() == Backend::avx2 ? fn##_avx2(__VA_ARGS__) \
                                           : fn##_scalar(__VA_ARGS__)
#else
#define RC_DISPATCH(fn, ...) return fn##_scalar(__VA_ARGS__)
#endif

void vexp(const double* x, double* out, std::size_t n) { RC_DISPATCH(vexp, x, out, n); }

double dot(const double* a, const double* b, std::size_t n) { RC_DISPATCH(dot, a, b, n); }

double wdot(const double* w, const double* a, const double* b, std::size_t n) {
  RC_DISPATCH(wdot, w, a, b, n);
}

double sum(const double* x, std::size_t n) { RC_DISPATCH(sum, x, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  RC_DISPATCH(axpy, alpha, x, y, n);
}

#undef RC_DISPATCH

}  // namespace ratecate::kern
