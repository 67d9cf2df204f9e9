#include <cmath>
#include <limits>

#include "doctest.h"
#include "sslreg/error.hpp"
#include "sslreg/gradcheck.hpp"
#include "sslreg/tensor.hpp"

using namespace sslreg;
using T64 = Tensor<double>;

namespace {

T64 random_tensor(Rng& rng, Shape shape, bool grad = true) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return T64::from_data(std::move(shape), std::move(v), grad);
}

// Weighted sum of every output entry, so each one reaches the loss with a
// distinct coefficient.
T64 project(Tape<double>& tape, const T64& y, const T64& weights) {
  return ops::sum(tape, ops::matmul(tape, y, weights));
}

void expect_gradients(const LossFn& loss, std::vector<T64> params) {
  Rng rng = make_rng(99, Stream::kData);
  GradCheckOptions opts;
  opts.samples = 60;
  const auto report = grad_check(loss, params, opts, rng);
  CHECK(report.max_rel_error < 1e-6);
}

}  // namespace

TEST_CASE("forward values") {
  Tape<double> tape;
  const auto sm = ops::softmax(tape, T64::from_data({1, 2}, {0.0, 0.0}));
  CHECK(sm[0] == doctest::Approx(0.5));
  CHECK(sm[1] == doctest::Approx(0.5));

  const auto ln = ops::layer_norm(tape, T64::from_data({1, 3}, {4.0, 4.0, 4.0}), T64::from_data({3}, {2.0, 2.0, 2.0}),
                                  T64::from_data({3}, {0.5, -1.0, 3.0}));
  CHECK(ln[0] == doctest::Approx(0.5));
  CHECK(ln[1] == doctest::Approx(-1.0));
  CHECK(ln[2] == doctest::Approx(3.0));

  const std::vector<int> target{0};
  const auto ce = ops::cross_entropy(tape, T64::from_data({1, 2}, {0.0, 0.0}), target);
  CHECK(ce.item() == doctest::Approx(std::log(2.0)));

  const auto ge = ops::gelu(tape, T64::from_data({3}, {0.0, 1.0, -1.0}));
  CHECK(ge[0] == 0.0);
  CHECK(ge[1] == doctest::Approx(0.8413447460685429));
  CHECK(ge[2] == doctest::Approx(-0.15865525393145707));

  const auto col = ops::softmax(tape, T64::from_data({2, 2}, {1.0, 5.0, 1.0, 2.0}), 0);
  CHECK(col[0] == doctest::Approx(0.5));
  CHECK(col[1] + col[3] == doctest::Approx(1.0));
}

TEST_CASE("backward basics") {
  {
    Tape<double> tape;
    T64 c = ops::matmul(tape, T64::from_data({1, 1}, {3.0}), T64::from_data({1, 1}, {3.0}));
    CHECK_FALSE(c.requires_grad());
    CHECK(tape.size() == 0);
  }
  {
    Tape<double> tape;
    T64 w = T64::from_data({1, 1}, {3.0}, true);
    T64 loss = ops::sum(tape, ops::matmul(tape, w, w));
    tape.backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(6.0));
    CHECK_THROWS_AS(tape.backward(loss), Error);
  }
  {
    Tape<double> tape;
    T64 a = T64::from_data({2}, {1.0, 2.0}, true), b = T64::from_data({2}, {-1.0, 5.0}, true);
    T64 loss = ops::sum(tape, ops::add(tape, a, b));
    tape.backward(loss);
    CHECK(a.grad()[0] == 1.0);
    CHECK(a.grad()[1] == 1.0);
    CHECK(b.grad()[0] == 1.0);
  }
  {
    // A tensor used twice accumulates both contributions.
    Tape<double> tape;
    T64 a = T64::from_data({2}, {1.0, 2.0}, true);
    T64 loss = ops::sum(tape, ops::add(tape, a, ops::scale(tape, a, 3.0)));
    tape.backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(4.0));
  }
  {
    Tape<double> tape;
    T64 a = T64::from_data({2}, {1.0, 2.0}, true);
    T64 y = ops::scale(tape, a, 2.0);
    CHECK_THROWS_AS(tape.backward(y), Error);
    Tape<double> empty;
    T64 s = T64::scalar(1.0, true);
    CHECK_THROWS_AS(empty.backward(s), Error);
  }
}

TEST_CASE("reset allows reuse") {
  Tape<double> tape;
  T64 w = T64::from_data({1, 1}, {2.0}, true);
  T64 loss = ops::sum(tape, ops::matmul(tape, w, w));
  tape.backward(loss);
  tape.reset();
  w.zero_grad();
  T64 again = ops::sum(tape, ops::matmul(tape, w, w));
  tape.backward(again);
  CHECK(w.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("shape errors name both shapes") {
  Tape<double> tape;
  try {
    ops::matmul(tape, T64::zeros({2, 3}), T64::zeros({4, 5}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("[2 x 3]") != std::string::npos);
    CHECK(what.find("[4 x 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::add(tape, T64::zeros({2}), T64::zeros({3})), ShapeError);
  CHECK_THROWS_AS(ops::add_bias(tape, T64::zeros({2, 3}), T64::zeros({2})), ShapeError);
  const std::vector<int> too_few{0};
  CHECK_THROWS_AS(ops::cross_entropy(tape, T64::zeros({2, 3}), too_few), ShapeError);
  const std::vector<int> out_of_range{0, 3};
  CHECK_THROWS(ops::cross_entropy(tape, T64::zeros({2, 3}), out_of_range));
}

TEST_CASE("non-finite outputs are rejected") {
  Tape<double> tape;
  const double big = std::numeric_limits<double>::max();
  CHECK_THROWS_AS(ops::add(tape, T64::from_data({1}, {big}), T64::from_data({1}, {big})), NumericError);
  CHECK_THROWS_AS(ops::scale(tape, T64::from_data({1}, {std::nan("")}), 1.0), NumericError);
}

TEST_CASE("dropout") {
  Tape<double> tape;
  Rng rng = make_rng(1, Stream::kDropout);
  const T64 x = T64::from_data({1, 1000}, std::vector<double>(1000, 1.0));
  const auto same = ops::dropout(tape, x, 0.0, rng);
  CHECK(same.data()[5] == 1.0);
  const auto y = ops::dropout(tape, x, 0.25, rng);
  int zeros = 0;
  for (double v : y.data()) {
    if (v == 0.0)
      ++zeros;
    else
      CHECK(v == doctest::Approx(1.0 / 0.75));
  }
  CHECK(zeros > 180);
  CHECK(zeros < 320);
}

TEST_CASE("per-op gradients match finite differences") {
  Rng rng = make_rng(5, Stream::kInit);
  const T64 x = random_tensor(rng, {3, 4});
  const T64 w = random_tensor(rng, {4, 5});
  const T64 w_nt = random_tensor(rng, {5, 4});
  const T64 bias = random_tensor(rng, {5});
  const T64 gamma = random_tensor(rng, {4}), beta = random_tensor(rng, {4});
  const T64 r4 = random_tensor(rng, {4, 1}, false), r5 = random_tensor(rng, {5, 1}, false);
  const T64 r3 = random_tensor(rng, {3, 1}, false), r8 = random_tensor(rng, {8, 1}, false);
  const T64 table = random_tensor(rng, {6, 4});
  const std::vector<TokenId> ids{1, 4, 1, 0};
  const std::vector<std::size_t> rows{2, 0, 2};
  const std::vector<int> targets{1, 0, 4};

  expect_gradients([&](Tape<double>& t) { return project(t, ops::matmul(t, x, w), r5); }, {x, w});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::matmul_nt(t, x, w_nt), r5); }, {x, w_nt});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::add_bias(t, ops::matmul(t, x, w), bias), r5); },
                   {bias});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::softmax(t, x, 1), r4); }, {x});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::softmax(t, x, 0), r4); }, {x});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::layer_norm(t, x, gamma, beta), r4); },
                   {x, gamma, beta});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::tanh(t, x), r4); }, {x});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::gelu(t, x), r4); }, {x});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::embedding_lookup(t, table, ids), r4); }, {table});
  expect_gradients(
      [&](Tape<double>& t) { return ops::cross_entropy(t, ops::matmul(t, x, w), targets); }, {x, w});
  expect_gradients(
      [&](Tape<double>& t) {
        return ops::cross_entropy(t, ops::matmul(t, x, w), targets, ops::Reduction::kSum);
      },
      {w});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::select_rows(t, x, rows), r4); }, {x});
  expect_gradients([&](Tape<double>& t) { return project(t, ops::column_slice(t, x, 1, 3), r3); }, {x});
  expect_gradients(
      [&](Tape<double>& t) {
        const std::vector<T64> parts{x, ops::scale(t, x, 2.0)};
        return project(t, ops::concat_columns<double>(t, parts), r8);
      },
      {x});
  expect_gradients(
      [&](Tape<double>& t) {
        const std::vector<T64> parts{x, ops::tanh(t, x)};
        return project(t, ops::concat_rows<double>(t, parts), r4);
      },
      {x});
}
