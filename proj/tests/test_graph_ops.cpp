#include "oracles.hpp"
#include "support.hpp"

#include "ma2gcn/graph_ops.hpp"

using namespace ma2gcn;
using namespace ma2gcn::graph;
using namespace testing;

namespace {

std::vector<double> flat(const Tensor &t) { return {t.values().begin(), t.values().end()}; }

oracle::Mat to_mat(const Matrix &m) {
  oracle::Mat out = oracle::zeros(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[i][j] = m(i, j);
  return out;
}

} // namespace

TEST_SUITE("graph_ops") {

TEST_CASE("two-node Laplacian and basis") {
  const auto a = Tensor::constant({2, 2}, {0, 1, 1, 0});
  const auto l = sym_normalized_laplacian(a);
  CHECK(flat(l) == std::vector<double>{1, -1, -1, 1});
  const auto ls = scale_laplacian(l);
  CHECK(flat(ls) == std::vector<double>{0, -1, -1, 0});
  const auto basis = chebyshev_basis(ls, 3);
  REQUIRE(basis.size() == 3);
  CHECK(flat(basis[0]) == std::vector<double>{1, 0, 0, 1});
  CHECK(flat(basis[1]) == std::vector<double>{0, -1, -1, 0});
  CHECK(flat(basis[2]) == std::vector<double>{1, 0, 0, 1});
  CHECK(chebyshev_basis(ls, 1).size() == 1);
  CHECK_KIND(chebyshev_basis(ls, 0), ErrorKind::ConfigError);
}

TEST_CASE("isolated nodes") {
  const auto l = sym_normalized_laplacian(Tensor::zeros({3, 3}));
  for (double v : l.values())
    CHECK(v == 0.0);
  const auto ls = scale_laplacian(l);
  CHECK(flat(ls) == flat(scale(Tensor::eye(3), -1.0)));
}

TEST_CASE("adjacency validation") {
  CHECK_KIND(sym_normalized_laplacian(Tensor::constant({2, 2}, {0, 1, 0, 0})), ErrorKind::NotSymmetric);
  CHECK_KIND(sym_normalized_laplacian(Tensor::constant({2, 2}, {0, -1, -1, 0})), ErrorKind::NegativeEntry);
  CHECK_KIND(sym_normalized_laplacian(Tensor::zeros({2, 3})), ErrorKind::ShapeMismatch);
}

TEST_CASE("Laplacian annihilates the square-root degree vector") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Matrix a = random_adjacency(rng, 5, 1.0);
    const auto l = sym_normalized_laplacian(to_tensor(a));
    for (int i = 0; i < 5; ++i) {
      double s = 0.0;
      for (int j = 0; j < 5; ++j)
        s += l[i * 5 + j] * std::sqrt(a.row(j).sum());
      CHECK(std::abs(s) < 1e-12);
    }
  }
}

TEST_CASE("scaled Laplacian has spectral radius at most one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(40 + seed);
    const std::size_t n = 3 + seed % 5;
    const auto ls = scale_laplacian(sym_normalized_laplacian(to_tensor(random_adjacency(rng, n))));
    // power iteration on the symmetric matrix
    std::vector<double> v = random_values(rng, n), w(n);
    double rho = 0.0;
    for (int it = 0; it < 2000; ++it) {
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          w[i] += ls[i * n + j] * v[j];
        norm += w[i] * w[i];
      }
      norm = std::sqrt(norm);
      double vn = 0.0;
      for (double x : v)
        vn += x * x;
      rho = norm / std::sqrt(vn);
      for (std::size_t i = 0; i < n; ++i)
        v[i] = w[i] / norm;
    }
    CHECK(rho <= 1.0 + 1e-9);
  }
}

TEST_CASE("basis matches the eigendecomposition oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(70 + seed);
    const std::size_t n = 2 + seed % 7;
    const Matrix a = random_adjacency(rng, n, 0.5);
    const auto basis = chebyshev_basis(scale_laplacian(sym_normalized_laplacian(to_tensor(a))), 4);
    const auto ref = oracle::chebyshev_by_eigen(to_mat(a), 4);
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          CHECK(std::abs(basis[k][i * n + j] - ref[k][i][j]) < 1e-9);
  }
}

TEST_CASE("graph convolution") {
  Rng rng(8);
  const std::size_t N = 3, Cin = 2, Cout = 4, G = 5;
  const Matrix a = random_adjacency(rng, N, 1.0);
  const auto basis = LaplacianBundle::build(to_tensor(a), 2).cheb;
  const auto x = random_const(rng, {G, N, Cin});
  const auto theta = random_const(rng, {2, Cin, Cout});
  const auto y = cheb_graph_conv(x, basis, theta);
  CHECK(y.shape() == Shape{G, N, Cout});

  std::vector<oracle::Mat> bm;
  for (const auto &b : basis)
    bm.push_back(oracle::from_flat(b.values(), N, N));
  const auto ref = oracle::cheb_conv(bm, x.values(), G, N, Cin, theta.values(), Cout);
  CHECK(max_abs_diff(y.values(), ref) < 1e-12);

  // identity filter on T_0 only reproduces the input
  std::vector<double> id(2 * Cin * Cin, 0.0);
  for (std::size_t c = 0; c < Cin; ++c)
    id[c * Cin + c] = 1.0;
  const auto same = cheb_graph_conv(x, basis, Tensor::constant({2, Cin, Cin}, id));
  CHECK(max_abs_diff(same.values(), x.values()) == 0.0);

  const auto zero = cheb_graph_conv(Tensor::zeros({G, N, Cin}), basis, theta);
  for (double v : zero.values())
    CHECK(v == 0.0);
  CHECK_KIND(cheb_graph_conv(x, basis, Tensor::zeros({3, Cin, Cout})), ErrorKind::ShapeMismatch);
}

TEST_CASE("graph convolution gradients flow into the adjacency") {
  Rng rng(12);
  auto a = Tensor::parameter({4, 4}, [&] {
    Matrix m = random_adjacency(rng, 4, 1.0);
    m.diagonal().setConstant(0.5);
    return std::vector<double>(m.data(), m.data() + m.size());
  }());
  auto theta = random_param(rng, {3, 2, 2});
  const auto x = random_const(rng, {2, 4, 2});
  const auto r = random_const(rng, {2, 4, 2});
  // symmetrize inside the function so perturbed entries stay valid
  auto f = [&] {
    const auto sym = scale(add(a, transpose(a)), 0.5);
    return sum(mul(cheb_graph_conv(x, LaplacianBundle::build(sym, 3).cheb, theta), r));
  };
  CHECK(finite_diff_check(f, a, 1e-6) < 1e-6);
  CHECK(finite_diff_check(f, theta, 1e-6) < 1e-6);
}

} // TEST_SUITE
