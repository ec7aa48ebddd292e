#pragma once
// Seed splitting, thread helpers and the low-discrepancy sequence used by
// the population oracles.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ratecate {

// splitmix64: all per-purpose streams are derived from one root seed so a
// single --seed reproduces every random draw in a run.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream identifiers; combine as derive_seed(root, purpose, index).
enum class Stream : std::uint64_t {
  folds = 1,
  dgp = 2,
  bootstrap = 3,
  replicate = 4,
  boost_cv = 5,
  permute = 6,
};

inline std::uint64_t derive_seed(std::uint64_t root, Stream s, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ (static_cast<std::uint64_t>(s) << 56)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t root, Stream s, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, s, index));
}

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Work is split by
// index, so results keyed by i are reproducible regardless of thread count.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

// Inverse standard normal CDF (Acklam's rational approximation, refined by
// one Halley step; |error| < 1e-15 on (1e-300, 1-1e-16)).
double inv_normal_cdf(double p);

// Additive-recurrence low-discrepancy sequence in [0,1)^dim (generalized
// golden ratio); deterministic, optionally Cranley-Patterson rotated by seed.
class QuasiSequence {
 public:
  QuasiSequence(int dim, std::uint64_t seed = 0);
  // Fills out[0..dim) with the next point.
  void next(double* out);

 private:
  std::vector<double> alpha_;
  std::vector<double> state_;
};

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace ratecate
