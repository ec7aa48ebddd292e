#pragma once
// Shared constants for the exp kernel. The polynomial is the classic Cephes
// rational approximation of exp on [-ln2/2, ln2/2] after 2^k range
// reduction; both backends must evaluate it with the same fma ordering so
// that vexp is bit-identical between scalar and AVX2.

#include <cmath>
#include <cstdint>
#include <cstring>

namespace ratecate::kern::detail {

inline constexpr double kExpClamp = 708.0;
inline constexpr double kLog2E = 1.4426950408889634073599;
inline constexpr double kC1 = 6.93145751953125e-1;
inline constexpr double kC2 = 1.42860682030941723212e-6;

inline constexpr double kP0 = 1.26177193074810590878e-4;
inline constexpr double kP1 = 3.02994407707441961300e-2;
inline constexpr double kP2 = 9.99999999999999999910e-1;

inline constexpr double kQ0 = 3.00198505138664455042e-6;
inline constexpr double kQ1 = 2.52448340349684104192e-3;
inline constexpr double kQ2 = 2.27265548208155028766e-1;
inline constexpr double kQ3 = 2.00000000000000000005e0;

// 2^k for |k| <= 1022 via exponent bits.
inline double pow2i(long long k) {
  const std::uint64_t bits = static_cast<std::uint64_t>(k + 1023) << 52;
  double r;
  std::memcpy(&r, &bits, sizeof r);
  return r;
}

// Scalar exp mirroring the vector algorithm operation-for-operation.
inline double exp_clamped(double x) {
  x = x < -kExpClamp ? -kExpClamp : x;
  x = x > kExpClamp ? kExpClamp : x;
  const double k = std::floor(std::fma(x, kLog2E, 0.5));
  x = std::fma(-k, kC1, x);
  x = std::fma(-k, kC2, x);
  const double xx = x * x;
  const double px = x * std::fma(std::fma(kP0, xx, kP1), xx, kP2);
  const double qx = std::fma(std::fma(std::fma(kQ0, xx, kQ1), xx, kQ2), xx, kQ3);
  const double e = px / (qx - px);
  return std::fma(e, 2.0, 1.0) * pow2i(static_cast<long long>(k));
}

}  // namespace ratecate::kern::detail
