#include "support.hpp"

#include "ma2gcn/tensor.hpp"

using namespace ma2gcn;
using namespace ma2gcn::ad;
using namespace testing;

namespace {

// Values with |x| >= 0.1 so kinks (relu, abs) are not straddled.
Tensor away_from_zero(Rng &rng, Shape shape) {
  auto v = random_values(rng, numel(shape), 0.1, 1.0);
  for (auto &x : v)
    if (rng.uniform() < 0.5)
      x = -x;
  return Tensor::parameter(std::move(shape), std::move(v));
}

void check_unary(const char *name, Tensor (*op)(const Tensor &), bool kinked = false) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Tensor x = kinked ? away_from_zero(rng, {3, 4}) : random_param(rng, {3, 4});
    const Tensor r = random_const(rng, op(x).shape());
    const double err = finite_diff_check([&] { return sum(mul(op(x), r)); }, x, 1e-5);
    CHECK_MESSAGE(err < 1e-6, name << " seed " << seed << " err " << err);
  }
}

} // namespace

TEST_SUITE("tensor") {

TEST_CASE("forward values of basic ops") {
  const auto a = Tensor::constant({2, 2}, {1, 2, 3, 4});
  const auto m = matmul(a, Tensor::eye(2));
  CHECK(std::vector<double>(m.values().begin(), m.values().end()) == std::vector<double>{1, 2, 3, 4});

  const auto s = softmax(Tensor::zeros({4}), 0);
  for (double v : s.values())
    CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ad::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(mean(a).item() == 2.5);
  CHECK(sum(a).item() == 10.0);
}

TEST_CASE("shape errors") {
  const auto a = Tensor::zeros({2, 3});
  const auto b = Tensor::zeros({3, 2});
  CHECK_KIND(add(a, b), ErrorKind::ShapeMismatch);
  CHECK_KIND(matmul(a, a), ErrorKind::ShapeMismatch);
  CHECK_KIND(reshape(a, {4}), ErrorKind::ShapeMismatch);
  CHECK_KIND(backward(a), ErrorKind::NotScalar);
}

TEST_CASE("gradient of x*x and untracked constants") {
  auto x = Tensor::parameter({1}, {3.0});
  backward(sum(mul(x, x)));
  REQUIRE(x.grad().size() == 1);
  CHECK(x.grad()[0] == 6.0);

  const auto c = Tensor::constant({1}, {3.0});
  auto w = Tensor::parameter({1}, {2.0});
  backward(sum(mul(c, w)));
  CHECK(c.grad().empty());
  CHECK_FALSE(c.requires_grad());
  CHECK(w.grad()[0] == 3.0);
}

TEST_CASE("leaf gradients accumulate until zero_grad") {
  auto x = Tensor::parameter({2}, {1.0, -2.0});
  backward(sum(scale(x, 3.0)));
  backward(sum(scale(x, 3.0)));
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  backward(sum(x));
  CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("shared subexpressions receive the sum of their uses") {
  auto x = Tensor::parameter({1}, {2.0});
  const auto y = mul(x, x);          // x^2
  backward(sum(add(mul(y, y), y))); // x^4 + x^2 -> 4x^3 + 2x = 36
  CHECK(x.grad()[0] == doctest::Approx(36.0).epsilon(1e-15));
}

TEST_CASE("tape lists parents before children") {
  auto x = Tensor::parameter({2}, {1.0, 2.0});
  const auto y = ad::tanh(x);
  const auto loss = sum(mul(y, x));
  const auto tape = Tape::record(loss);
  const auto &nodes = tape.nodes();
  auto pos = [&](const Tensor &t) {
    return std::find(nodes.begin(), nodes.end(), t.node()) - nodes.begin();
  };
  CHECK(pos(x) < pos(y));
  CHECK(pos(y) < pos(loss));
  CHECK(nodes.back() == loss.node());
}

TEST_CASE("elementwise adjoints match finite differences") {
  check_unary("tanh", [](const Tensor &a) { return ad::tanh(a); });
  check_unary("sigmoid", [](const Tensor &a) { return sigmoid(a); });
  check_unary("relu", [](const Tensor &a) { return relu(a); }, true);
  check_unary("abs", [](const Tensor &a) { return ad::abs(a); }, true);
  check_unary("scale", [](const Tensor &a) { return scale(a, -1.7); });
  check_unary("add_scalar", [](const Tensor &a) { return add_scalar(a, 0.3); });
  check_unary("inv_sqrt", [](const Tensor &a) { return inv_sqrt_or_zero(add_scalar(mul(a, a), 0.5)); });
  check_unary("softmax0", [](const Tensor &a) { return softmax(a, 0); });
  check_unary("softmax1", [](const Tensor &a) { return softmax(a, 1); });
  check_unary("transpose", [](const Tensor &a) { return transpose(a); });
  check_unary("reshape", [](const Tensor &a) { return reshape(a, {2, 6}); });
  check_unary("sum_last", [](const Tensor &a) { return sum_last(a); });
  check_unary("mean", [](const Tensor &a) { return mean(a); });
  check_unary("take", [](const Tensor &a) { return take(a, 1, 2); });
}

TEST_CASE("binary and structural adjoints match finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    auto a = random_param(rng, {3, 4});
    auto b = random_param(rng, {3, 4});
    auto m = random_param(rng, {4, 2});
    auto v = random_param(rng, {4});
    auto sq = random_param(rng, {3, 3});
    auto r = random_param(rng, {3});
    auto x4 = random_param(rng, {2, 3, 2, 4});
    auto w = random_param(rng, {2, 4, 3});
    auto bias = random_param(rng, {3});
    const std::size_t dilation = 1 + seed % 2;

    const std::vector<std::pair<const char *, std::function<Tensor()>>> cases = {
        {"add", [&] { return add(a, b); }},
        {"sub", [&] { return sub(a, b); }},
        {"mul", [&] { return mul(a, b); }},
        {"matmul", [&] { return matmul(a, m); }},
        {"matmul_last", [&] { return matmul_last(x4, m); }},
        {"add_bias", [&] { return add_bias(a, v); }},
        {"linear", [&] { return linear(a, m, Tensor::constant({2}, {0.5, -0.5})); }},
        {"graph_mix", [&] { return graph_mix(sq, a); }},
        {"scale_rows_cols", [&] { return scale_rows_cols(sq, r); }},
        {"permute", [&] { return permute(x4, {2, 0, 3, 1}); }},
        {"stack", [&] { return stack({a, b, ad::tanh(a)}); }},
        {"causal_conv1d", [&] { return causal_conv1d(x4, w, bias, dilation); }},
    };
    for (const auto &[name, f] : cases) {
      const Tensor weights = random_const(rng, f().shape());
      for (Tensor *p : {&a, &b, &m, &v, &sq, &r, &x4, &w, &bias}) {
        p->zero_grad();
        const double err = finite_diff_check([&] { return sum(mul(f(), weights)); }, *p, 1e-5);
        CHECK_MESSAGE(err < 1e-6, name << " seed " << seed << " err " << err);
      }
    }
  }
}

TEST_CASE("finite difference probe itself") {
  auto x = Tensor::parameter({1}, {3.0});
  CHECK(finite_diff_check([&] { return mul(x, x); }, x, 1e-5) < 1e-8);
  auto y = Tensor::parameter({3}, {0.5, -2.0, 4.0});
  CHECK(finite_diff_check([&] { return sum(scale(y, 2.5)); }, y, 1e-5) < 1e-9);
  CHECK(y[0] == 0.5); // restored
}

TEST_CASE("softmax is shift invariant and sums to one") {
  Rng rng(3);
  const auto x = random_const(rng, {4, 5}, -3.0, 3.0);
  const auto shifted = add_scalar(x, 1000.0);
  const auto a = softmax(x, 1), b = softmax(shifted, 1);
  CHECK(max_abs_diff(a.values(), b.values()) < 1e-12);
  const auto rows = sum_last(a);
  for (double v : rows.values())
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("causal convolution ignores the future") {
  Rng rng(11);
  const auto x = random_const(rng, {2, 6, 3, 2});
  const auto w = random_const(rng, {2, 2, 4});
  const auto b = random_const(rng, {4});
  const auto y = causal_conv1d(x, w, b, 2);
  for (std::size_t t = 0; t < 6; ++t) {
    auto v = std::vector<double>(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < v.size(); ++i)
      if ((i / (3 * 2)) % 6 > t)
        v[i] += rng.uniform(-5.0, 5.0);
    const auto y2 = causal_conv1d(Tensor::constant(x.shape(), v), w, b, 2);
    for (std::size_t i = 0; i < y.size(); ++i)
      if ((i / (3 * 4)) % 6 <= t)
        CHECK(y[i] == y2[i]);
  }
}

TEST_CASE("causal convolution reads zero padding before t = 0") {
  // single channel, taps [w0 = 1, w1 = 10], dilation 1
  const auto x = Tensor::constant({1, 3, 1, 1}, {1, 2, 3});
  const auto w = Tensor::constant({2, 1, 1}, {1, 10});
  const auto y = causal_conv1d(x, w, Tensor::zeros({1}), 1);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0 + 10.0);
  CHECK(y[2] == 3.0 + 20.0);
}

TEST_CASE("only leaves are mutable") {
  auto x = Tensor::parameter({2}, {1, 2});
  const auto y = scale(x, 2.0);
  CHECK_FALSE(y.is_leaf());
  CHECK_THROWS(const_cast<Tensor &>(y).mutable_values());
  x.mutable_values()[0] = 5.0;
  CHECK(x[0] == 5.0);
  CHECK(y[0] == 2.0); // recorded value is a snapshot
}

} // TEST_SUITE
