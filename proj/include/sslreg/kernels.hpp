#pragma once

// Inner-loop kernels with a scalar reference and SIMD variants. The variant is
// chosen once at startup from CPU features; SSLREG_KERNELS=scalar|avx2|neon
// overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace sslreg::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

template <class T>
struct Table {
  T (*dot)(const T* a, const T* b, std::size_t n);
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);  // y += alpha * x
  T (*sum)(const T* x, std::size_t n);
};

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
/// Throws if `isa` is not supported on this machine.
void set_active_isa(Isa isa);

template <class T>
const Table<T>& table(Isa isa);

template <class T>
const Table<T>& active() {
  return table<T>(active_isa());
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  return active<T>().dot(a.data(), b.data(), a.size());
}

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  active<T>().axpy(alpha, x.data(), y.data(), x.size());
}

/// Row-major products accumulated into C.
/// nn: C[m,n] += A[m,k] B[k,n];  nt: C[m,n] += A[m,k] B[n,k]^T;
/// tn: C[k,n] += A[m,k]^T B[m,n].
template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);
template <class T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);
template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c);

namespace detail {
template <class T>
const Table<T>* scalar_table();
template <class T>
const Table<T>* avx2_table();  // nullptr when not compiled in
template <class T>
const Table<T>* neon_table();
}  // namespace detail

}  // namespace sslreg::kernels
