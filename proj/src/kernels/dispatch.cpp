#include <atomic>
#include <cstdlib>
#include <string>

#include "sslreg/error.hpp"
#include "sslreg/kernels.hpp"

namespace sslreg::kernels {
namespace detail {

#ifndef SSLREG_HAVE_AVX2_TU
template <>
const Table<float>* avx2_table<float>() {
  return nullptr;
}
template <>
const Table<double>* avx2_table<double>() {
  return nullptr;
}
#endif

#ifndef SSLREG_HAVE_NEON_TU
template <>
const Table<float>* neon_table<float>() {
  return nullptr;
}
template <>
const Table<double>* neon_table<double>() {
  return nullptr;
}
#endif

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(SSLREG_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* forced = std::getenv("SSLREG_KERNELS")) {
    const std::string name(forced);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon})
      if (name == isa_name(isa) && isa_supported(isa)) return isa;
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "?";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
    case Isa::kAvx2: {
      static const bool ok = cpu_has_avx2();
      return ok;
    }
    case Isa::kNeon:
#ifdef SSLREG_HAVE_NEON_TU
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa))
    throw Error("kernel variant '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

template <class T>
const Table<T>& table(Isa isa) {
  const Table<T>* t = nullptr;
  switch (isa) {
    case Isa::kScalar: t = detail::scalar_table<T>(); break;
    case Isa::kAvx2: t = detail::avx2_table<T>(); break;
    case Isa::kNeon: t = detail::neon_table<T>(); break;
  }
  if (t == nullptr || !isa_supported(isa))
    throw Error("kernel variant '" + std::string(isa_name(isa)) + "' is not available");
  return *t;
}

template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  const auto& t = active<T>();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      if (aip != T(0)) t.axpy(aip, b + p * n, c + i * n, n);
    }
}

template <class T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  const auto& t = active<T>();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += t.dot(a + i * k, b + j * k, k);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  const auto& t = active<T>();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = 0; i < k; ++i) {
      const T ari = a[r * k + i];
      if (ari != T(0)) t.axpy(ari, b + r * n, c + i * n, n);
    }
}

template const Table<float>& table<float>(Isa);
template const Table<double>& table<double>(Isa);
template void gemm_nn<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_nn<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
template void gemm_nt<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_nt<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
template void gemm_tn<float>(std::size_t, std::size_t, std::size_t, const float*, const float*, float*);
template void gemm_tn<double>(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);

}  // namespace sslreg::kernels
