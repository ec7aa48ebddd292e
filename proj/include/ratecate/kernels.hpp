#pragma once
// Vectorized array kernels backing the estimating-equation and GLM inner
// loops. Every kernel has a scalar reference implementation and, on x86-64,
// an AVX2 variant; the backend is picked at runtime from CPUID and can be
// forced for testing. Results of vexp() are bit-identical across backends
// (same polynomial, same operation order); reductions differ only by
// floating-point reassociation.

#include <cstddef>
#include <string>

namespace ratecate::kern {

enum class Backend { scalar, avx2 };

// Active backend (auto-detected on first use).
Backend active_backend();
std::string backend_name();
bool cpu_has_avx2();

// Force a backend. Throws std::runtime_error if unsupported on this CPU.
void set_backend(Backend b);
// Back to auto-detection.
void reset_backend();

// out[i] = exp(x[i]); inputs clamped to [-708, 708]. Finite inputs only.
void vexp(const double* x, double* out, std::size_t n);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i w[i] * a[i] * b[i]
double wdot(const double* w, const double* a, const double* b, std::size_t n);

// sum_i x[i]
double sum(const double* x, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

}  // namespace ratecate::kern
