#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, which is how
// parameters are shared between the encoder and every head. Operations live
// in `sslreg::ops`, take the Tape first and record a backward closure when the
// tape is recording and some input requires a gradient.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  /// Row/column view of a rank-2 tensor; rank-1 is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T& operator[](std::size_t i) { return node_->data[i]; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Allocates a zeroed buffer on first access.
  std::span<T> grad() const;
  std::span<const T> grad_view() const { return node_->grad; }
  void zero_grad();

  /// Deep copy of shape and values; no gradient.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Ordered record of backward closures for one unit of work.
template <class T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return ops_.size(); }
  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every closure once in reverse order.
  /// Parameter gradients accumulate into existing buffers. A second call
  /// without `reset()` throws.
  void backward(Tensor<T>& loss);
  void reset();

 private:
  std::vector<std::function<void()>> ops_;
  bool recording_;
  bool consumed_ = false;
};

namespace ops {

template <class T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
/// a * b^T
template <class T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
/// x[m, n] + bias[n] broadcast over rows.
template <class T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);
template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);
/// Rank-2 softmax along axis 0 (columns) or 1 (rows); max-subtracted.
template <class T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, int axis = 1);
template <class T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));
template <class T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x);
/// Exact erf form.
template <class T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);
template <class T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::span<const TokenId> ids);

enum class Reduction { kMean, kSum };
/// -log softmax(logits[i])[targets[i]] reduced over rows.
template <class T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> targets,
                        Reduction reduction = Reduction::kMean);
/// Inverted dropout; identity when rate == 0.
template <class T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Rng& rng);
template <class T>
Tensor<T> select_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::size_t> rows);
template <class T>
Tensor<T> column_slice(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t width);
template <class T>
Tensor<T> concat_columns(Tape<T>& tape, std::span<const Tensor<T>> parts);
template <class T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts);
/// Sum of all elements as a scalar.
template <class T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

}  // namespace ops

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sslreg
