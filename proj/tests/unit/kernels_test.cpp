#include <cmath>
#include <vector>

#include "doctest.h"
#include "sslreg/kernels.hpp"
#include "sslreg/rng.hpp"

using namespace sslreg;
using kernels::Isa;

namespace {

template <class T>
std::vector<T> random_vector(Rng& rng, std::size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(2.0 * uniform01(rng) - 1.0);
  return v;
}

// Restores the startup selection when a test case ends.
struct IsaGuard {
  Isa saved = kernels::active_isa();
  ~IsaGuard() { kernels::set_active_isa(saved); }
};

template <class T>
void check_equivalent(Isa isa, double tol) {
  const auto& ref = kernels::table<T>(Isa::kScalar);
  const auto& simd = kernels::table<T>(isa);
  Rng rng = make_rng(42, Stream::kData);
  for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 100u, 1000u}) {
    const auto a = random_vector<T>(rng, n), b = random_vector<T>(rng, n);
    const double scale = std::sqrt(static_cast<double>(n) + 1.0);
    CHECK(std::abs(static_cast<double>(ref.dot(a.data(), b.data(), n) - simd.dot(a.data(), b.data(), n))) <=
          tol * scale);
    CHECK(std::abs(static_cast<double>(ref.sum(a.data(), n) - simd.sum(a.data(), n))) <= tol * scale);

    auto y_ref = random_vector<T>(rng, n);
    auto y_simd = y_ref;
    const T alpha = static_cast<T>(0.37);
    ref.axpy(alpha, a.data(), y_ref.data(), n);
    simd.axpy(alpha, a.data(), y_simd.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(static_cast<double>(y_ref[i] - y_simd[i])) <= tol);
  }
}

}  // namespace

TEST_CASE("scalar kernels match direct loops") {
  const auto& k = kernels::table<double>(Isa::kScalar);
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(k.dot(a.data(), b.data(), 3) == 32.0);
  CHECK(k.sum(a.data(), 3) == 6.0);
  std::vector<double> y{1, 1, 1};
  k.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y == std::vector<double>{3, 5, 7});
}

TEST_CASE("SIMD kernels agree with the scalar reference") {
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!kernels::isa_supported(isa)) continue;
    CAPTURE(kernels::isa_name(isa));
    check_equivalent<float>(isa, 1e-5);
    check_equivalent<double>(isa, 1e-13);
  }
}

TEST_CASE("unsupported variants are refused") {
  IsaGuard guard;
  CHECK(kernels::isa_supported(Isa::kScalar));
  CHECK_NOTHROW(kernels::set_active_isa(Isa::kScalar));
  CHECK(kernels::active_isa() == Isa::kScalar);
  for (Isa isa : {Isa::kAvx2, Isa::kNeon})
    if (!kernels::isa_supported(isa)) CHECK_THROWS(kernels::set_active_isa(isa));
}

TEST_CASE("gemm variants against naive triple loops") {
  IsaGuard guard;
  Rng rng = make_rng(7, Stream::kData);
  const std::size_t m = 5, k = 9, n = 13;
  const auto a = random_vector<double>(rng, m * k);
  const auto b = random_vector<double>(rng, k * n);
  const auto bt = random_vector<double>(rng, n * k);
  const auto g = random_vector<double>(rng, m * n);
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (!kernels::isa_supported(isa)) continue;
    kernels::set_active_isa(isa);
    std::vector<double> c(m * n, 1.0), c_nt(m * n, 1.0), c_tn(k * n, 1.0);
    kernels::gemm_nn(m, k, n, a.data(), b.data(), c.data());
    kernels::gemm_nt(m, k, n, a.data(), bt.data(), c_nt.data());
    kernels::gemm_tn(m, k, n, a.data(), g.data(), c_tn.data());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double nn = 1.0, nt = 1.0;
        for (std::size_t p = 0; p < k; ++p) {
          nn += a[i * k + p] * b[p * n + j];
          nt += a[i * k + p] * bt[j * k + p];
        }
        CHECK(c[i * n + j] == doctest::Approx(nn).epsilon(1e-12));
        CHECK(c_nt[i * n + j] == doctest::Approx(nt).epsilon(1e-12));
      }
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) {
        double tn = 1.0;
        for (std::size_t i = 0; i < m; ++i) tn += a[i * k + p] * g[i * n + j];
        CHECK(c_tn[p * n + j] == doctest::Approx(tn).epsilon(1e-12));
      }
  }
}
