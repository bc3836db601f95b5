#pragma once

// Chebyshev spectral graph convolution on the scaled symmetric normalized
// Laplacian. Everything here is differentiable with respect to the adjacency
// input, because the model's aggregated adjacency is learned.

#include "ma2gcn/tensor.hpp"

#include <cstddef>
#include <vector>

namespace ma2gcn::graph {

/// Throws NotSymmetric (beyond `tol`) or NegativeEntry.
void check_adjacency(const ad::Tensor &a, double tol = 1e-9);

/// L_sym = D^-1/2 (D - A) D^-1/2. Rows and columns of zero-degree nodes are
/// all zero, so isolated nodes are left untouched by the convolution.
ad::Tensor sym_normalized_laplacian(const ad::Tensor &a);

/// (2 / lambda_max) L_sym - I with lambda_max = 2, i.e. L_sym - I.
ad::Tensor scale_laplacian(const ad::Tensor &l_sym);

/// T_0 = I, T_1 = L, T_k = 2 L T_{k-1} - T_{k-2}; returns K matrices.
std::vector<ad::Tensor> chebyshev_basis(const ad::Tensor &l_scaled, std::size_t K);

/// sum_k T_k x theta_k for x (..., N, Cin), theta (K, Cin, Cout).
ad::Tensor cheb_graph_conv(const ad::Tensor &x, const std::vector<ad::Tensor> &basis,
                           const ad::Tensor &theta);

struct LaplacianBundle {
  ad::Tensor a_input;
  ad::Tensor l_sym;
  ad::Tensor l_scaled;
  std::vector<ad::Tensor> cheb;

  static LaplacianBundle build(const ad::Tensor &a, std::size_t K);
};

} // namespace ma2gcn::graph
