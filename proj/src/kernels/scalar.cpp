#include "sslreg/kernels.hpp"

namespace sslreg::kernels::detail {
namespace {

template <class T>
T dot_scalar(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy_scalar(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
T sum_scalar(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <class T>
constexpr Table<T> kScalar{&dot_scalar<T>, &axpy_scalar<T>, &sum_scalar<T>};

}  // namespace

template <>
const Table<float>* scalar_table<float>() {
  return &kScalar<float>;
}
template <>
const Table<double>* scalar_table<double>() {
  return &kScalar<double>;
}

}  // namespace sslreg::kernels::detail
