#include "sslreg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sslreg/error.hpp"
#include "sslreg/kernels.hpp"

namespace sslreg {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? " x " : "") << shape[i];
  ss << ']';
  return ss.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->data.assign(shape_size(shape), T(0));
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_size(shape) != data.size())
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <class T>
std::size_t Tensor<T>::rows() const {
  if (rank() == 2) return shape()[0];
  return 1;
}

template <class T>
std::size_t Tensor<T>::cols() const {
  if (rank() == 2) return shape()[1];
  if (rank() == 1) return shape()[0];
  return 1;
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
  return node_->data[0];
}

template <class T>
std::span<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  return from_data(shape(), node_->data, requires_grad());
}

template <class T>
void Tape<T>::record(std::function<void()> backward_fn) {
  if (recording_) ops_.push_back(std::move(backward_fn));
}

template <class T>
void Tape<T>::backward(Tensor<T>& loss) {
  if (consumed_) throw Error("backward: tape already consumed; call reset() first");
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  if (ops_.empty()) throw Error("backward: tape is empty");
  consumed_ = true;
  loss.grad()[0] = T(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

template <class T>
void Tape<T>::reset() {
  ops_.clear();
  consumed_ = false;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

namespace ops {
namespace {

template <class T>
bool needs_grad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.data())
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in output");
}

template <class T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_to_string(t.shape()));
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " + shape_to_string(b));
}

}  // namespace

template <class T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a.shape(), b.shape());
  auto out = Tensor<T>::zeros({m, n}, needs_grad(tape, {&a, &b}));
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data().data());
  check_finite(out, "matmul");
  if (out.requires_grad())
    tape.record([a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad_view().data();
      if (a.requires_grad()) kernels::gemm_nt(m, n, k, g, b.data().data(), a.grad().data());
      if (b.requires_grad()) kernels::gemm_tn(m, k, n, a.data().data(), g, b.grad().data());
    });
  return out;
}

template <class T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) mismatch("matmul_nt", a.shape(), b.shape());
  auto out = Tensor<T>::zeros({m, n}, needs_grad(tape, {&a, &b}));
  kernels::gemm_nt(m, k, n, a.data().data(), b.data().data(), out.data().data());
  check_finite(out, "matmul_nt");
  if (out.requires_grad())
    tape.record([a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad_view().data();
      if (a.requires_grad()) kernels::gemm_nn(m, n, k, g, b.data().data(), a.grad().data());
      if (b.requires_grad()) kernels::gemm_tn(m, n, k, g, a.data().data(), b.grad().data());
    });
  return out;
}

template <class T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) mismatch("add", a.shape(), b.shape());
  auto out = Tensor<T>::zeros(a.shape(), needs_grad(tape, {&a, &b}));
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  check_finite(out, "add");
  if (out.requires_grad())
    tape.record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      if (a.requires_grad()) kernels::axpy<T>(T(1), g, a.grad());
      if (b.requires_grad()) kernels::axpy<T>(T(1), g, b.grad());
    });
  return out;
}

template <class T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank2(x, "add_bias");
  if (bias.rank() != 1 || bias.size() != x.cols()) mismatch("add_bias", x.shape(), bias.shape());
  const std::size_t m = x.rows(), n = x.cols();
  auto out = x.clone();
  out.set_requires_grad(needs_grad(tape, {&x, &bias}));
  auto o = out.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) kernels::axpy<T>(T(1), bv, o.subspan(i * n, n));
  check_finite(out, "add_bias");
  if (out.requires_grad())
    tape.record([x, bias, out, m, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      if (x.requires_grad()) kernels::axpy<T>(T(1), g, x.grad());
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t i = 0; i < m; ++i) kernels::axpy<T>(T(1), g.subspan(i * n, n), gb);
      }
    });
  return out;
}

template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x}));
  auto o = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  check_finite(out, "scale");
  if (out.requires_grad())
    tape.record([x, out, factor]() mutable {
      if (!out.has_grad()) return;
      kernels::axpy<T>(factor, out.grad_view(), x.grad());
    });
  return out;
}

template <class T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, int axis) {
  require_rank2(x, "softmax");
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t m = x.rows(), n = x.cols();
  // Walk `lines` independent vectors of length `len` with element stride `stride`.
  const std::size_t lines = axis == 1 ? m : n;
  const std::size_t len = axis == 1 ? n : m;
  const std::size_t stride = axis == 1 ? 1 : n;
  const std::size_t line_step = axis == 1 ? n : 1;
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t base = l * line_step;
    T mx = xv[base];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * stride]);
    T total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      const T e = std::exp(xv[base + j * stride] - mx);
      o[base + j * stride] = e;
      total += e;
    }
    for (std::size_t j = 0; j < len; ++j) o[base + j * stride] /= total;
  }
  check_finite(out, "softmax");
  if (out.requires_grad())
    tape.record([x, out, lines, len, stride, line_step]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t base = l * line_step;
        T inner = 0;
        for (std::size_t j = 0; j < len; ++j) inner += g[base + j * stride] * y[base + j * stride];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t i = base + j * stride;
          gx[i] += y[i] * (g[i] - inner);
        }
      }
    });
  return out;
}

template <class T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.size() != n) mismatch("layer_norm", x.shape(), gamma.shape());
  if (beta.size() != n) mismatch("layer_norm", x.shape(), beta.shape());
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x, &gamma, &beta}));
  std::vector<T> xhat(m * n);
  std::vector<T> rstd(m);
  auto xv = x.data();
  auto o = out.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = xv.data() + i * n;
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(n);
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mean) * rstd[i];
      xhat[i * n + j] = h;
      o[i * n + j] = gv[j] * h + bv[j];
    }
  }
  check_finite(out, "layer_norm");
  if (out.requires_grad())
    tape.record([x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), m, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto gv = gamma.data();
      if (gamma.requires_grad()) {
        auto gg = gamma.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
      }
      if (beta.requires_grad()) {
        auto gb = beta.grad();
        for (std::size_t i = 0; i < m; ++i) kernels::axpy<T>(T(1), g.subspan(i * n, n), gb);
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        std::vector<T> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          T mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < n; ++j) {
            dxhat[j] = g[i * n + j] * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[i * n + j];
          }
          mean_d /= static_cast<T>(n);
          mean_dx /= static_cast<T>(n);
          for (std::size_t j = 0; j < n; ++j)
            gx[i * n + j] += rstd[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
        }
      }
    });
  return out;
}

template <class T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(xv[i]);
  check_finite(out, "tanh");
  if (out.requires_grad())
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  return out;
}

template <class T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<T> * kInvSqrt2;
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * kInvSqrt2));
  check_finite(out, "gelu");
  if (out.requires_grad())
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto xv = x.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = xv[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
        const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    });
  return out;
}

template <class T>
Tensor<T> embedding_lookup(Tape<T>& tape, const Tensor<T>& table, std::span<const TokenId> ids) {
  require_rank2(table, "embedding_lookup");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<TokenId> idv(ids.begin(), ids.end());
  for (TokenId id : idv)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw ShapeError("embedding_lookup: id " + std::to_string(id) + " outside table " +
                       shape_to_string(table.shape()));
  auto out = Tensor<T>::zeros({idv.size(), d}, needs_grad(tape, {&table}));
  auto tv = table.data();
  auto o = out.data();
  for (std::size_t r = 0; r < idv.size(); ++r)
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idv[r]) * d), d,
                o.begin() + static_cast<std::ptrdiff_t>(r * d));
  if (out.requires_grad())
    tape.record([table, out, idv = std::move(idv), d]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto gt = table.grad();
      for (std::size_t r = 0; r < idv.size(); ++r)
        kernels::axpy<T>(T(1), g.subspan(r * d, d), gt.subspan(static_cast<std::size_t>(idv[r]) * d, d));
    });
  return out;
}

template <class T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> targets,
                        Reduction reduction) {
  require_rank2(logits, "cross_entropy");
  const std::size_t m = logits.rows(), c = logits.cols();
  if (targets.size() != m)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_to_string(logits.shape()));
  if (m == 0) throw ShapeError("cross_entropy: empty batch");
  std::vector<int> tv(targets.begin(), targets.end());
  for (int t : tv)
    if (t < 0 || static_cast<std::size_t>(t) >= c)
      throw ShapeError("cross_entropy: target " + std::to_string(t) + " outside logits " +
                       shape_to_string(logits.shape()));
  std::vector<T> probs(m * c);
  auto lv = logits.data();
  T total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = lv.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += -(row[static_cast<std::size_t>(tv[i])] - mx - std::log(z));
  }
  const T norm = reduction == Reduction::kMean ? T(1) / static_cast<T>(m) : T(1);
  auto out = Tensor<T>::scalar(total * norm, needs_grad(tape, {&logits}));
  check_finite(out, "cross_entropy");
  if (out.requires_grad())
    tape.record([logits, out, probs = std::move(probs), tv = std::move(tv), m, c, norm]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad_view()[0] * norm;
      auto gl = logits.grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < c; ++j) gl[i * c + j] += g * probs[i * c + j];
        gl[i * c + static_cast<std::size_t>(tv[i])] -= g;
      }
    });
  return out;
}

template <class T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const T keep_scale = T(1) / static_cast<T>(1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<T> mask(x.size());
  for (T& v : mask) v = keep(rng) ? keep_scale : T(0);
  auto out = Tensor<T>::zeros(x.shape(), needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * mask[i];
  if (out.requires_grad())
    tape.record([x, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  return out;
}

template <class T>
Tensor<T> select_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const std::size_t> rows) {
  require_rank2(x, "select_rows");
  const std::size_t n = x.cols();
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  for (std::size_t r : rv)
    if (r >= x.rows())
      throw ShapeError("select_rows: row " + std::to_string(r) + " outside " + shape_to_string(x.shape()));
  auto out = Tensor<T>::zeros({rv.size(), n}, needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < rv.size(); ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rv[i] * n), n, o.begin() + static_cast<std::ptrdiff_t>(i * n));
  if (out.requires_grad())
    tape.record([x, out, rv = std::move(rv), n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto gx = x.grad();
      for (std::size_t i = 0; i < rv.size(); ++i)
        kernels::axpy<T>(T(1), g.subspan(i * n, n), gx.subspan(rv[i] * n, n));
    });
  return out;
}

template <class T>
Tensor<T> column_slice(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t width) {
  require_rank2(x, "column_slice");
  const std::size_t m = x.rows(), n = x.cols();
  if (start + width > n)
    throw ShapeError("column_slice: columns [" + std::to_string(start) + ", " + std::to_string(start + width) +
                     ") outside " + shape_to_string(x.shape()));
  auto out = Tensor<T>::zeros({m, width}, needs_grad(tape, {&x}));
  auto xv = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(i * n + start), width,
                o.begin() + static_cast<std::ptrdiff_t>(i * width));
  if (out.requires_grad())
    tape.record([x, out, m, n, start, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      auto gx = x.grad();
      for (std::size_t i = 0; i < m; ++i)
        kernels::axpy<T>(T(1), g.subspan(i * width, width), gx.subspan(i * n + start, width));
    });
  return out;
}

template <class T>
Tensor<T> concat_columns(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_columns: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_rank2(p, "concat_columns");
    if (p.rows() != m) mismatch("concat_columns", parts[0].shape(), p.shape());
    total += p.cols();
    grad = grad || p.requires_grad();
  }
  auto out = Tensor<T>::zeros({m, total}, grad && tape.recording());
  auto o = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto pv = p.data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(i * w), w,
                  o.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
    offset += w;
  }
  if (out.requires_grad())
    tape.record([ps = std::vector<Tensor<T>>(parts.begin(), parts.end()), out, m, total]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      std::size_t offset = 0;
      for (auto& p : ps) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < m; ++i)
            kernels::axpy<T>(T(1), g.subspan(i * total + offset, w), gp.subspan(i * w, w));
        }
        offset += w;
      }
    });
  return out;
}

template <class T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != n) mismatch("concat_rows", parts[0].shape(), p.shape());
    total += p.rows();
    grad = grad || p.requires_grad();
  }
  auto out = Tensor<T>::zeros({total, n}, grad && tape.recording());
  auto o = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  if (out.requires_grad())
    tape.record([ps = std::vector<Tensor<T>>(parts.begin(), parts.end()), out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad_view();
      std::size_t offset = 0;
      for (auto& p : ps) {
        if (p.requires_grad()) kernels::axpy<T>(T(1), g.subspan(offset, p.size()), p.grad());
        offset += p.size();
      }
    });
  return out;
}

template <class T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  auto out = Tensor<T>::scalar(kernels::active<T>().sum(x.data().data(), x.size()), needs_grad(tape, {&x}));
  check_finite(out, "sum");
  if (out.requires_grad())
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad_view()[0];
      for (T& v : x.grad()) v += g;
    });
  return out;
}

#define SSLREG_INSTANTIATE_OPS(T)                                                                      \
  template Tensor<T> matmul<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> matmul_nt<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> add<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add_bias<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> scale<T>(Tape<T>&, const Tensor<T>&, T);                                          \
  template Tensor<T> softmax<T>(Tape<T>&, const Tensor<T>&, int);                                      \
  template Tensor<T> layer_norm<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> tanh<T>(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> gelu<T>(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> embedding_lookup<T>(Tape<T>&, const Tensor<T>&, std::span<const TokenId>);        \
  template Tensor<T> cross_entropy<T>(Tape<T>&, const Tensor<T>&, std::span<const int>, Reduction);    \
  template Tensor<T> dropout<T>(Tape<T>&, const Tensor<T>&, double, Rng&);                             \
  template Tensor<T> select_rows<T>(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>);         \
  template Tensor<T> column_slice<T>(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> concat_columns<T>(Tape<T>&, std::span<const Tensor<T>>);                          \
  template Tensor<T> concat_rows<T>(Tape<T>&, std::span<const Tensor<T>>);                             \
  template Tensor<T> sum<T>(Tape<T>&, const Tensor<T>&);

SSLREG_INSTANTIATE_OPS(float)
SSLREG_INSTANTIATE_OPS(double)

#undef SSLREG_INSTANTIATE_OPS

}  // namespace ops
}  // namespace sslreg
