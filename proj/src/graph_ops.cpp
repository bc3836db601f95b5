#include "ma2gcn/graph_ops.hpp"

#include "ma2gcn/error.hpp"

#include <cmath>
#include <string>

namespace ma2gcn::graph {

using ad::Tensor;

namespace {

void require_square(const Tensor &a, const char *what) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " needs a square matrix, got " +
                                              ad::shape_str(a.shape()));
}

} // namespace

void check_adjacency(const Tensor &a, double tol) {
  require_square(a, "adjacency");
  const std::size_t n = a.dim(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = a[i * n + j];
      if (v < 0.0)
        throw Error(ErrorKind::NegativeEntry, "A[" + std::to_string(i) + "][" + std::to_string(j) + "] < 0");
      if (j > i && std::abs(v - a[j * n + i]) > tol)
        throw Error(ErrorKind::NotSymmetric,
                    "A[" + std::to_string(i) + "][" + std::to_string(j) + "] != A[j][i]");
    }
}

Tensor sym_normalized_laplacian(const Tensor &a) {
  check_adjacency(a);
  const std::size_t n = a.dim(0);
  const Tensor degree = ad::sum_last(a);
  const Tensor inv_sqrt = ad::inv_sqrt_or_zero(degree);
  std::vector<double> diag(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    diag[i * n + i] = degree[i] > 0.0 ? 1.0 : 0.0;
  return ad::sub(Tensor::constant({n, n}, std::move(diag)), ad::scale_rows_cols(a, inv_sqrt));
}

Tensor scale_laplacian(const Tensor &l_sym) {
  require_square(l_sym, "scale_laplacian");
  return ad::sub(l_sym, Tensor::eye(l_sym.dim(0)));
}

std::vector<Tensor> chebyshev_basis(const Tensor &l_scaled, std::size_t K) {
  require_square(l_scaled, "chebyshev_basis");
  if (K < 1)
    throw Error(ErrorKind::ConfigError, "Chebyshev order K must be >= 1");
  std::vector<Tensor> basis;
  basis.reserve(K);
  basis.push_back(Tensor::eye(l_scaled.dim(0)));
  if (K > 1)
    basis.push_back(l_scaled);
  for (std::size_t k = 2; k < K; ++k)
    basis.push_back(ad::sub(ad::scale(ad::matmul(l_scaled, basis[k - 1]), 2.0), basis[k - 2]));
  return basis;
}

Tensor cheb_graph_conv(const Tensor &x, const std::vector<Tensor> &basis, const Tensor &theta) {
  if (theta.rank() != 3 || theta.dim(0) != basis.size() || x.rank() < 2 ||
      x.shape().back() != theta.dim(1))
    throw Error(ErrorKind::ShapeMismatch, "cheb_graph_conv: x " + ad::shape_str(x.shape()) +
                                              ", theta " + ad::shape_str(theta.shape()) + ", K=" +
                                              std::to_string(basis.size()));
  Tensor out;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    Tensor term = ad::matmul_last(x, ad::take(theta, 0, k));
    // T_0 is the identity
    if (k > 0)
      term = ad::graph_mix(basis[k], term);
    out = out.defined() ? ad::add(out, term) : term;
  }
  return out;
}

LaplacianBundle LaplacianBundle::build(const Tensor &a, std::size_t K) {
  LaplacianBundle b;
  b.a_input = a;
  b.l_sym = sym_normalized_laplacian(a);
  b.l_scaled = scale_laplacian(b.l_sym);
  b.cheb = chebyshev_basis(b.l_scaled, K);
  return b;
}

} // namespace ma2gcn::graph
