#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ratecate/kernels.hpp"

using namespace ratecate;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

struct BackendGuard {
  ~BackendGuard() { kern::reset_backend(); }
};

}  // namespace

TEST_CASE("vexp matches std::exp to near machine precision") {
  BackendGuard guard;
  for (const std::size_t n : {0ul, 1ul, 3ul, 4ul, 7ul, 64ul, 1001ul}) {
    const auto x = random_vec(n, 42 + n, -700.0, 700.0);
    std::vector<double> out(n);
    kern::vexp(x.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(out[i] == doctest::Approx(std::exp(x[i])).epsilon(1e-13));
    }
  }
}

TEST_CASE("vexp clamps extreme inputs instead of overflowing") {
  const std::vector<double> x = {-1e10, -709.0, 709.0, 1e10};
  std::vector<double> out(x.size());
  kern::vexp(x.data(), out.data(), x.size());
  for (const double v : out) CHECK(std::isfinite(v));
  CHECK(out[0] > 0.0);
  CHECK(out[3] == out[2]);  // saturated at the clamp
}

TEST_CASE("scalar and avx2 backends agree") {
  if (!kern::cpu_has_avx2()) return;
  BackendGuard guard;
  for (const std::size_t n : {1ul, 2ul, 5ul, 8ul, 13ul, 100ul, 1003ul}) {
    const auto x = random_vec(n, 7 * n + 1, -30.0, 30.0);
    const auto w = random_vec(n, 7 * n + 2, 0.0, 2.0);
    const auto b = random_vec(n, 7 * n + 3, -1.0, 1.0);

    kern::set_backend(kern::Backend::scalar);
    std::vector<double> exp_s(n);
    kern::vexp(x.data(), exp_s.data(), n);
    const double dot_s = kern::dot(x.data(), b.data(), n);
    const double wdot_s = kern::wdot(w.data(), x.data(), b.data(), n);
    const double sum_s = kern::sum(x.data(), n);
    std::vector<double> y_s = b;
    kern::axpy(0.37, x.data(), y_s.data(), n);

    kern::set_backend(kern::Backend::avx2);
    std::vector<double> exp_v(n);
    kern::vexp(x.data(), exp_v.data(), n);
    const double dot_v = kern::dot(x.data(), b.data(), n);
    const double wdot_v = kern::wdot(w.data(), x.data(), b.data(), n);
    const double sum_v = kern::sum(x.data(), n);
    std::vector<double> y_v = b;
    kern::axpy(0.37, x.data(), y_v.data(), n);

    // identical polynomial and fma order: exp must agree bit-for-bit
    for (std::size_t i = 0; i < n; ++i) CHECK(exp_s[i] == exp_v[i]);
    // reductions reassociate; compare with a scaled tolerance
    CHECK(dot_v == doctest::Approx(dot_s).epsilon(1e-12));
    CHECK(wdot_v == doctest::Approx(wdot_s).epsilon(1e-12));
    CHECK(sum_v == doctest::Approx(sum_s).epsilon(1e-12));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y_v[i] == doctest::Approx(y_s[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("dot and wdot reference values") {
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const std::vector<double> b = {4.0, 5.0, 6.0};
  const std::vector<double> w = {1.0, 0.5, 2.0};
  CHECK(kern::dot(a.data(), b.data(), 3) == doctest::Approx(32.0));
  CHECK(kern::wdot(w.data(), a.data(), b.data(), 3) == doctest::Approx(4.0 + 5.0 + 36.0));
  CHECK(kern::sum(a.data(), 3) == doctest::Approx(6.0));
}

TEST_CASE("backend forcing is honored and reported") {
  BackendGuard guard;
  kern::set_backend(kern::Backend::scalar);
  CHECK(kern::backend_name() == "scalar");
  kern::reset_backend();
  if (kern::cpu_has_avx2()) CHECK(kern::backend_name() == "avx2");
}
