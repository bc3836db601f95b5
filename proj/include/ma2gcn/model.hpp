#pragma once

#include "ma2gcn/matrix.hpp"
#include "ma2gcn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ma2gcn {

struct ModelConfig {
  std::size_t N = 225;
  std::size_t P = 12;
  std::size_t Q = 1;
  std::size_t D = 2;
  std::size_t K = 3;             // Chebyshev order
  std::size_t hidden = 128;      // H, adaptive graph generator
  std::size_t attn_hidden = 128; // H', adjacency attention
  std::size_t blocks = 3;
  std::size_t channels = 32;     // feature channels inside every block
  std::size_t kernel = 2;        // temporal taps; block b uses dilation 2^b
  bool use_attention = true;
  bool use_dynamic = true;

  std::size_t F() const { return P * D; }
  /// Throws ConfigError on zero sizes.
  void validate() const;

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Ordered, named parameter leaves. Order is fixed by construction and is
/// the order used by optimizers and checkpoints.
class ParameterSet {
public:
  ad::Tensor &add(std::string name, ad::Shape shape, std::vector<double> values);
  ad::Tensor &get(const std::string &name);
  const ad::Tensor &get(const std::string &name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::string &name(std::size_t i) const { return names_[i]; }
  ad::Tensor &at(std::size_t i) { return tensors_[i]; }
  const ad::Tensor &at(std::size_t i) const { return tensors_[i]; }
  std::size_t scalar_count() const;
  void zero_grad();

  /// Flat copy of all parameter values, in order.
  std::vector<double> snapshot() const;
  void restore(const std::vector<double> &flat);

private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> tensors_;
};

struct GatedTcnParams {
  ad::Tensor theta1, theta2; // (kernel, Cin, Cout)
  ad::Tensor b1, b2;         // (Cout)
  std::size_t dilation = 1;
};

/// h = tanh(x * theta1 + b1) (.) sigmoid(x * theta2 + b2), causal along T.
/// x is (B, T, N, C).
ad::Tensor gated_tcn(const ad::Tensor &x, const GatedTcnParams &p);

/// Flattens a (B, P, N, D) window into the node feature matrix (N, P*D),
/// averaged over the batch. Column index is p * D + d.
ad::Tensor window_node_features(const ad::Tensor &window);

/// Row-wise softmax(((X N1)(X N2)^T) N3): (N, F) -> (N, N).
ad::Tensor adaptive_graph(const ad::Tensor &x_tilde, const ad::Tensor &n1, const ad::Tensor &n2,
                          const ad::Tensor &n3);

struct AttentionResult {
  ad::Tensor aggregated; // (N, N)
  ad::Tensor weights;    // (k)
};

/// Scores every adjacency with mean(ReLU(A_i W) V), softmaxes the scores and
/// returns the weighted sum of the matrices.
AttentionResult ma2_attention(const std::vector<ad::Tensor> &matrices, const ad::Tensor &w,
                              const ad::Tensor &v);

/// Same combination with constant weights (one per matrix).
AttentionResult fixed_weight_aggregate(const std::vector<ad::Tensor> &matrices,
                                       const std::vector<double> &weights);

/// Divides every row by its maximum (rows that are all zero stay zero).
Matrix row_max_normalize(const Matrix &m);

/// The three non-learned adjacencies, row-max-normalized as model inputs.
struct StaticGraphs {
  ad::Tensor initial;  // A
  ad::Tensor squared;  // A^2
  ad::Tensor mobility; // A_mo

  static StaticGraphs prepare(const Matrix &a, const Matrix &a_squared, const Matrix &a_mobility);
  std::size_t N() const { return initial.dim(0); }
};

struct ForwardResult {
  ad::Tensor prediction;        // (B, Q, N, D)
  ad::Tensor attention_weights; // (k); k = 4, 3 or 1 depending on ablation flags
  ad::Tensor dynamic_adjacency; // (N, N); undefined when use_dynamic is false
  ad::Tensor aggregated;        // (N, N) after symmetrization, before the Laplacian
};

class Ma2gcnModel {
public:
  /// Initializes parameters deterministically from `seed`.
  Ma2gcnModel(const ModelConfig &cfg, std::uint64_t seed);

  const ModelConfig &config() const { return cfg_; }
  ParameterSet &parameters() { return params_; }
  const ParameterSet &parameters() const { return params_; }

  /// window: (B, P, N, D) normalized features. Throws ConfigMismatch on
  /// shape disagreement with the config or the static graphs.
  ForwardResult forward(const ad::Tensor &window, const StaticGraphs &graphs) const;

private:
  GatedTcnParams block_tcn(std::size_t b) const;

  ModelConfig cfg_;
  ParameterSet params_;
};

} // namespace ma2gcn
