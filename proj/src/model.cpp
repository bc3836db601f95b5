#include "ma2gcn/model.hpp"

#include "ma2gcn/error.hpp"
#include "ma2gcn/graph_ops.hpp"
#include "ma2gcn/random.hpp"

#include <algorithm>
#include <cmath>

namespace ma2gcn {

using ad::Tensor;

void ModelConfig::validate() const {
  for (auto [v, name] : {std::pair{N, "N"}, {P, "P"}, {Q, "Q"}, {D, "D"}, {K, "K"}, {hidden, "hidden"},
                         {attn_hidden, "attn_hidden"}, {blocks, "blocks"}, {channels, "channels"},
                         {kernel, "kernel"}})
    if (v == 0)
      throw Error(ErrorKind::ConfigError, std::string("model.") + name + " must be positive");
}

// ---- ParameterSet ----------------------------------------------------------

Tensor &ParameterSet::add(std::string name, ad::Shape shape, std::vector<double> values) {
  names_.push_back(std::move(name));
  tensors_.push_back(Tensor::parameter(std::move(shape), std::move(values)));
  return tensors_.back();
}

Tensor &ParameterSet::get(const std::string &name) {
  return const_cast<Tensor &>(std::as_const(*this).get(name));
}

const Tensor &ParameterSet::get(const std::string &name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw Error(ErrorKind::ValidationError, "no parameter named '" + name + "'");
  return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto &t : tensors_)
    n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto &t : tensors_)
    t.zero_grad();
}

std::vector<double> ParameterSet::snapshot() const {
  std::vector<double> flat;
  flat.reserve(scalar_count());
  for (const auto &t : tensors_)
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void ParameterSet::restore(const std::vector<double> &flat) {
  if (flat.size() != scalar_count())
    throw Error(ErrorKind::ValidationError, "parameter snapshot size mismatch");
  std::size_t off = 0;
  for (auto &t : tensors_) {
    auto v = t.mutable_values();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + v.size()), v.begin());
    off += v.size();
  }
}

// ---- building blocks ---------------------------------------------------------

Tensor gated_tcn(const Tensor &x, const GatedTcnParams &p) {
  if (p.theta1.shape() != p.theta2.shape() || p.b1.shape() != p.b2.shape())
    throw Error(ErrorKind::ShapeMismatch, "gated_tcn: filter and gate branches differ in shape");
  const Tensor filter = ad::tanh(ad::causal_conv1d(x, p.theta1, p.b1, p.dilation));
  const Tensor gate = ad::sigmoid(ad::causal_conv1d(x, p.theta2, p.b2, p.dilation));
  return ad::mul(filter, gate);
}

Tensor window_node_features(const Tensor &window) {
  if (window.rank() != 4)
    throw Error(ErrorKind::ShapeMismatch, "window must be (B,P,N,D), got " + ad::shape_str(window.shape()));
  const std::size_t B = window.dim(0), P = window.dim(1), N = window.dim(2), D = window.dim(3);
  std::vector<double> x(N * P * D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t d = 0; d < D; ++d)
          x[n * P * D + p * D + d] += window[((b * P + p) * N + n) * D + d];
  for (auto &v : x)
    v /= static_cast<double>(B);
  return Tensor::constant({N, P * D}, std::move(x));
}

Tensor adaptive_graph(const Tensor &x_tilde, const Tensor &n1, const Tensor &n2, const Tensor &n3) {
  if (x_tilde.rank() != 2 || n1.shape() != n2.shape() || n1.rank() != 2 || n1.dim(0) != x_tilde.dim(1) ||
      n3.rank() != 2 || n3.dim(0) != x_tilde.dim(0) || n3.dim(1) != x_tilde.dim(0))
    throw Error(ErrorKind::ShapeMismatch, "adaptive_graph: X " + ad::shape_str(x_tilde.shape()) + ", N1 " +
                                              ad::shape_str(n1.shape()) + ", N3 " + ad::shape_str(n3.shape()));
  const Tensor left = ad::matmul(x_tilde, n1);
  const Tensor right = ad::matmul(x_tilde, n2);
  const Tensor affinity = ad::matmul(ad::matmul(left, ad::transpose(right)), n3);
  return ad::softmax(affinity, 1);
}

namespace {

Tensor weighted_sum(const std::vector<Tensor> &matrices, const Tensor &weights) {
  const std::size_t k = matrices.size(), n = matrices.front().dim(0);
  const Tensor stacked = ad::reshape(ad::stack(matrices), {k, n * n});
  return ad::reshape(ad::matmul(ad::reshape(weights, {1, k}), stacked), {n, n});
}

void check_matrices(const std::vector<Tensor> &matrices) {
  if (matrices.empty())
    throw Error(ErrorKind::ShapeMismatch, "no adjacency matrices to aggregate");
  const auto &s = matrices.front().shape();
  if (s.size() != 2 || s[0] != s[1])
    throw Error(ErrorKind::ShapeMismatch, "adjacency must be square, got " + ad::shape_str(s));
  for (const auto &m : matrices)
    if (m.shape() != s)
      throw Error(ErrorKind::ShapeMismatch, "adjacency shapes differ");
}

std::vector<double> glorot(Rng &rng, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(count);
  for (auto &x : v)
    x = rng.uniform(-limit, limit);
  return v;
}

} // namespace

AttentionResult ma2_attention(const std::vector<Tensor> &matrices, const Tensor &w, const Tensor &v) {
  check_matrices(matrices);
  const std::size_t n = matrices.front().dim(0);
  if (w.rank() != 2 || w.dim(0) != n || v.rank() != 2 || v.dim(0) != w.dim(1) || v.dim(1) != 1)
    throw Error(ErrorKind::ShapeMismatch, "ma2_attention: W " + ad::shape_str(w.shape()) + ", V " +
                                              ad::shape_str(v.shape()));
  std::vector<Tensor> scores;
  scores.reserve(matrices.size());
  for (const auto &a : matrices)
    scores.push_back(ad::mean(ad::matmul(ad::relu(ad::matmul(a, w)), v)));
  AttentionResult r;
  r.weights = ad::softmax(ad::reshape(ad::stack(scores), {matrices.size()}), 0);
  r.aggregated = weighted_sum(matrices, r.weights);
  return r;
}

AttentionResult fixed_weight_aggregate(const std::vector<Tensor> &matrices, const std::vector<double> &weights) {
  check_matrices(matrices);
  if (weights.size() != matrices.size())
    throw Error(ErrorKind::ShapeMismatch, "one weight per adjacency required");
  AttentionResult r;
  r.weights = Tensor::constant({weights.size()}, weights);
  r.aggregated = matrices.size() == 1 && weights[0] == 1.0 ? matrices[0] : weighted_sum(matrices, r.weights);
  return r;
}

Matrix row_max_normalize(const Matrix &m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    if (mx > 0.0)
      out.row(i) /= mx;
  }
  return out;
}

StaticGraphs StaticGraphs::prepare(const Matrix &a, const Matrix &a_squared, const Matrix &a_mobility) {
  auto as_tensor = [](const Matrix &m) {
    const Matrix r = row_max_normalize(m);
    return Tensor::constant({static_cast<std::size_t>(r.rows()), static_cast<std::size_t>(r.cols())},
                            std::vector<double>(r.data(), r.data() + r.size()));
  };
  if (a.rows() != a.cols() || a_squared.rows() != a.rows() || a_mobility.rows() != a.rows() ||
      a_squared.cols() != a.cols() || a_mobility.cols() != a.cols())
    throw Error(ErrorKind::ShapeMismatch, "static adjacency matrices must share one N x N shape");
  return {as_tensor(a), as_tensor(a_squared), as_tensor(a_mobility)};
}

// ---- model -------------------------------------------------------------------

Ma2gcnModel::Ma2gcnModel(const ModelConfig &cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t C = cfg_.channels;
  for (std::size_t b = 0; b < cfg_.blocks; ++b) {
    const std::size_t cin = b == 0 ? cfg_.D : C;
    const std::string pre = "block" + std::to_string(b) + ".";
    params_.add(pre + "theta1", {cfg_.kernel, cin, C}, glorot(rng, cfg_.kernel * cin * C, cfg_.kernel * cin, C));
    params_.add(pre + "b1", {C}, std::vector<double>(C, 0.0));
    params_.add(pre + "theta2", {cfg_.kernel, cin, C}, glorot(rng, cfg_.kernel * cin * C, cfg_.kernel * cin, C));
    params_.add(pre + "b2", {C}, std::vector<double>(C, 0.0));
    params_.add(pre + "cheb", {cfg_.K, C, C}, glorot(rng, cfg_.K * C * C, cfg_.K * C, C));
    if (cin != C) {
      params_.add(pre + "res_w", {cin, C}, glorot(rng, cin * C, cin, C));
      params_.add(pre + "res_b", {C}, std::vector<double>(C, 0.0));
    }
  }
  if (cfg_.use_dynamic) {
    const std::size_t F = cfg_.F(), H = cfg_.hidden, N = cfg_.N;
    params_.add("adaptive.N1", {F, H}, glorot(rng, F * H, F, H));
    params_.add("adaptive.N2", {F, H}, glorot(rng, F * H, F, H));
    params_.add("adaptive.N3", {N, N}, glorot(rng, N * N, N, N));
  }
  if (cfg_.use_attention) {
    const std::size_t N = cfg_.N, H = cfg_.attn_hidden;
    params_.add("attention.W", {N, H}, glorot(rng, N * H, N, H));
    params_.add("attention.V", {H, 1}, glorot(rng, H, H, 1));
  }
  const std::size_t out = cfg_.Q * cfg_.D;
  params_.add("head.w", {C, out}, glorot(rng, C * out, C, out));
  params_.add("head.b", {out}, std::vector<double>(out, 0.0));
}

GatedTcnParams Ma2gcnModel::block_tcn(std::size_t b) const {
  const std::string pre = "block" + std::to_string(b) + ".";
  return {params_.get(pre + "theta1"), params_.get(pre + "theta2"), params_.get(pre + "b1"),
          params_.get(pre + "b2"), std::size_t{1} << b};
}

ForwardResult Ma2gcnModel::forward(const Tensor &window, const StaticGraphs &graphs) const {
  const auto &c = cfg_;
  if (window.rank() != 4 || window.dim(1) != c.P || window.dim(2) != c.N || window.dim(3) != c.D)
    throw Error(ErrorKind::ConfigMismatch, "window " + ad::shape_str(window.shape()) +
                                               " does not match (B," + std::to_string(c.P) + "," +
                                               std::to_string(c.N) + "," + std::to_string(c.D) + ")");
  if (graphs.N() != c.N)
    throw Error(ErrorKind::ConfigMismatch, "static graphs have N=" + std::to_string(graphs.N()) +
                                               ", model expects " + std::to_string(c.N));
  ForwardResult r;
  AttentionResult agg;
  if (!c.use_attention && !c.use_dynamic) {
    agg = fixed_weight_aggregate({graphs.initial}, {1.0});
  } else {
    std::vector<Tensor> mats{graphs.initial, graphs.squared};
    if (c.use_dynamic) {
      r.dynamic_adjacency = adaptive_graph(window_node_features(window), params_.get("adaptive.N1"),
                                           params_.get("adaptive.N2"), params_.get("adaptive.N3"));
      mats.push_back(r.dynamic_adjacency);
    }
    mats.push_back(graphs.mobility);
    agg = c.use_attention
              ? ma2_attention(mats, params_.get("attention.W"), params_.get("attention.V"))
              : fixed_weight_aggregate(mats, std::vector<double>(mats.size(), 1.0 / static_cast<double>(mats.size())));
  }
  r.attention_weights = agg.weights;

  // undirected graph: symmetrize, no self loops
  std::vector<double> off_diag(c.N * c.N, 1.0);
  for (std::size_t i = 0; i < c.N; ++i)
    off_diag[i * c.N + i] = 0.0;
  r.aggregated = ad::mul(ad::scale(ad::add(agg.aggregated, ad::transpose(agg.aggregated)), 0.5),
                         Tensor::constant({c.N, c.N}, std::move(off_diag)));
  const auto basis = graph::LaplacianBundle::build(r.aggregated, c.K).cheb;

  Tensor h = window;
  for (std::size_t b = 0; b < c.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    const Tensor temporal = gated_tcn(h, block_tcn(b));
    const Tensor spatial = graph::cheb_graph_conv(temporal, basis, params_.get(pre + "cheb"));
    const Tensor residual =
        h.dim(3) == c.channels ? h : ad::linear(h, params_.get(pre + "res_w"), params_.get(pre + "res_b"));
    h = ad::add(spatial, residual);
  }
  const std::size_t B = window.dim(0);
  const Tensor last = ad::take(h, 1, c.P - 1); // (B, N, C)
  const Tensor out = ad::linear(last, params_.get("head.w"), params_.get("head.b"));
  r.prediction = ad::permute(ad::reshape(out, {B, c.N, c.Q, c.D}), {0, 2, 1, 3});
  return r;
}

} // namespace ma2gcn
