#include "ma2gcn/tensor.hpp"

#include "ma2gcn/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ma2gcn::ad {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = false;
  const char *op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> adjoint;
};

} // namespace detail

using detail::Node;

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(Node &)> adjoint, const char *op);

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(const char *op, const std::string &detail) {
  throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + detail);
}

void require_same(const char *op, const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    shape_error(op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank(const char *op, const Tensor &a, std::size_t rank) {
  if (a.rank() != rank)
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
}

// Gradient buffer of a parent, allocated on first use. Null when the parent
// is untracked.
double *grad_buffer(Node &n) {
  if (!n.requires_grad)
    return nullptr;
  if (n.grad.size() != n.value.size())
    n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool track) {
  if (numel(shape) != values.size())
    shape_error("tensor", "shape " + shape_str(shape) + " holds " + std::to_string(numel(shape)) +
                              " values, got " + std::to_string(values.size()));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = track;
  n->leaf = true;
  return n;
}

template <typename Fwd, typename Bwd>
Tensor unary(const char *op, const Tensor &a, Fwd fwd, Bwd dydx) {
  const auto &x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = fwd(x[i]);
  return make_result(a.shape(), std::move(y), {a}, [dydx](Node &self) {
    Node &p = *self.parents[0];
    double *gp = grad_buffer(p);
    if (!gp)
      return;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      gp[i] += self.grad[i] * dydx(p.value[i], self.value[i]);
  }, op);
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape &shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i)
    s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i)
    s.inner *= shape[i];
  return s;
}

} // namespace

std::size_t numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(Node &)> adjoint, const char *op) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->op = op;
  const bool tracked =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor &t) { return t.requires_grad(); });
  if (tracked) {
    n->requires_grad = true;
    n->adjoint = std::move(adjoint);
    n->parents.reserve(inputs.size());
    for (const auto &t : inputs)
      n->parents.push_back(t.node());
  }
  return Tensor(std::move(n));
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    v[i * n + i] = 1.0;
  return constant({n, n}, std::move(v));
}

const Shape &Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::span<const double> Tensor::values() const { return node_->value; }
std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }

double Tensor::item() const {
  if (size() != 1)
    throw Error(ErrorKind::NotScalar, "item() on " + shape_str(shape()));
  return node_->value[0];
}

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf)
    throw Error(ErrorKind::ValidationError, "only leaf tensors can be mutated");
  return node_->value;
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::scale_grad(double factor) {
  for (auto &g : node_->grad)
    g *= factor;
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

// ---- Tape / backward -------------------------------------------------------

Tape Tape::record(const Tensor &root) {
  Tape tape;
  if (!root.requires_grad())
    return tape;
  std::unordered_set<const Node *> seen;
  // Iterative post-order DFS: (node, next parent to visit).
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second)
        stack.emplace_back(std::move(parent), 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::replay_adjoints() {
  if (order_.empty())
    return;
  for (auto &n : order_)
    if (!n->leaf)
      n->grad.assign(n->value.size(), 0.0);
  order_.back()->grad.assign(order_.back()->value.size(), 1.0);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node &n = **it;
    if (n.adjoint)
      n.adjoint(n);
  }
}

void backward(const Tensor &loss) {
  if (!loss.defined() || loss.size() != 1)
    throw Error(ErrorKind::NotScalar,
                "backward() needs a single-element loss, got " +
                    (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  auto tape = Tape::record(loss);
  tape.replay_adjoints();
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor &a, const Tensor &b) {
  require_same("add", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node &self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double *g = grad_buffer(*self.parents[k]))
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          g[i] += self.grad[i];
  }, "add");
}

Tensor sub(const Tensor &a, const Tensor &b) {
  require_same("sub", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i];
    if (double *g = grad_buffer(*self.parents[1]))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] -= self.grad[i];
  }, "sub");
}

Tensor mul(const Tensor &a, const Tensor &b) {
  require_same("mul", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node &self) {
    Node &pa = *self.parents[0];
    Node &pb = *self.parents[1];
    if (double *g = grad_buffer(pa))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i] * pb.value[i];
    if (double *g = grad_buffer(pb))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i] * pa.value[i];
  }, "mul");
}

Tensor scale(const Tensor &a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor &a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor &a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor &a) {
  return unary("sigmoid", a,
               [](double x) {
                 if (x >= 0)
                   return 1.0 / (1.0 + std::exp(-x));
                 const double e = std::exp(x);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor &a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor &a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor inv_sqrt_or_zero(const Tensor &a) {
  return unary("inv_sqrt_or_zero", a, [](double x) { return x > 0 ? 1.0 / std::sqrt(x) : 0.0; },
               [](double, double y) { return -0.5 * y * y * y; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor &a) {
  double s = 0.0;
  for (double v : a.values())
    s += v;
  return make_result({1}, {s}, {a}, [](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i)
        g[i] += self.grad[0];
  }, "sum");
}

Tensor mean(const Tensor &a) {
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.values())
    s += v;
  return make_result({1}, {s / n}, {a}, [n](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i)
        g[i] += self.grad[0] / n;
  }, "mean");
}

Tensor sum_last(const Tensor &a) {
  if (a.rank() < 1)
    shape_error("sum_last", "rank 0");
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  if (out_shape.empty())
    out_shape = {1};
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j)
      y[r] += a[r * n + j];
  return make_result(std::move(out_shape), std::move(y), {a}, [n, rows](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j)
          g[r * n + j] += self.grad[r];
  }, "sum_last");
}

// ---- shape -----------------------------------------------------------------

Tensor reshape(const Tensor &a, Shape shape) {
  if (numel(shape) != a.size())
    shape_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<double> y(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(y), {a}, [](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad[i];
  }, "reshape");
}

Tensor transpose(const Tensor &a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      y[j * r + i] = a[i * c + j];
  return make_result({c, r}, std::move(y), {a}, [r, c](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          g[i * c + j] += self.grad[j * r + i];
  }, "transpose");
}

Tensor permute(const Tensor &a, const std::vector<std::size_t> &axes) {
  const std::size_t rank = a.rank();
  if (axes.size() != rank)
    shape_error("permute", "axes length mismatch");
  std::vector<bool> used(rank, false);
  for (auto ax : axes) {
    if (ax >= rank || used[ax])
      shape_error("permute", "axes are not a permutation");
    used[ax] = true;
  }
  Shape out_shape(rank);
  for (std::size_t k = 0; k < rank; ++k)
    out_shape[k] = a.dim(axes[k]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t k = rank; k-- > 1;)
    in_stride[k - 1] = in_stride[k] * a.dim(k);

  // source[o] = flat input index feeding output o
  auto source = std::make_shared<std::vector<std::size_t>>(a.size());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < a.size(); ++o) {
    std::size_t s = 0;
    for (std::size_t k = 0; k < rank; ++k)
      s += idx[k] * in_stride[axes[k]];
    (*source)[o] = s;
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < out_shape[k])
        break;
      idx[k] = 0;
    }
  }
  std::vector<double> y(a.size());
  for (std::size_t o = 0; o < y.size(); ++o)
    y[o] = a[(*source)[o]];
  return make_result(std::move(out_shape), std::move(y), {a}, [source](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t o = 0; o < self.grad.size(); ++o)
        g[(*source)[o]] += self.grad[o];
  }, "permute");
}

Tensor stack(const std::vector<Tensor> &parts) {
  if (parts.empty())
    shape_error("stack", "no inputs");
  for (const auto &p : parts)
    require_same("stack", parts.front(), p);
  const std::size_t each = parts.front().size();
  Shape out_shape{parts.size()};
  out_shape.insert(out_shape.end(), parts.front().shape().begin(), parts.front().shape().end());
  std::vector<double> y;
  y.reserve(each * parts.size());
  for (const auto &p : parts)
    y.insert(y.end(), p.values().begin(), p.values().end());
  return make_result(std::move(out_shape), std::move(y), parts, [each](Node &self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k)
      if (double *g = grad_buffer(*self.parents[k]))
        for (std::size_t i = 0; i < each; ++i)
          g[i] += self.grad[k * each + i];
  }, "stack");
}

Tensor take(const Tensor &a, std::size_t axis, std::size_t index) {
  if (axis >= a.rank() || index >= a.dim(axis))
    shape_error("take", "axis/index out of range for " + shape_str(a.shape()));
  const auto s = split_at(a.shape(), axis);
  Shape out_shape;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (k != axis)
      out_shape.push_back(a.dim(k));
  if (out_shape.empty())
    out_shape = {1};
  std::vector<double> y(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i)
      y[o * s.inner + i] = a[(o * s.len + index) * s.inner + i];
  return make_result(std::move(out_shape), std::move(y), {a}, [s, index](Node &self) {
    if (double *g = grad_buffer(*self.parents[0]))
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i)
          g[(o * s.len + index) * s.inner + i] += self.grad[o * s.inner + i];
  }, "take");
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0))
    shape_error("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> y(m * n);
  MapM(y.data(), m, n).noalias() = MapC(a.values().data(), m, k) * MapC(b.values().data(), k, n);
  return make_result({m, n}, std::move(y), {a, b}, [m, k, n](Node &self) {
    Node &pa = *self.parents[0];
    Node &pb = *self.parents[1];
    MapC g(self.grad.data(), m, n);
    if (double *ga = grad_buffer(pa))
      MapM(ga, m, k).noalias() += g * MapC(pb.value.data(), k, n).transpose();
    if (double *gb = grad_buffer(pb))
      MapM(gb, k, n).noalias() += MapC(pa.value.data(), m, k).transpose() * g;
  }, "matmul");
}

Tensor matmul_last(const Tensor &x, const Tensor &w) {
  require_rank("matmul_last", w, 2);
  if (x.rank() < 1 || x.shape().back() != w.dim(0))
    shape_error("matmul_last", shape_str(x.shape()) + " x " + shape_str(w.shape()));
  const std::size_t in = w.dim(0), out = w.dim(1), rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out;
  std::vector<double> y(rows * out);
  MapM(y.data(), rows, out).noalias() =
      MapC(x.values().data(), rows, in) * MapC(w.values().data(), in, out);
  return make_result(std::move(out_shape), std::move(y), {x, w}, [rows, in, out](Node &self) {
    Node &px = *self.parents[0];
    Node &pw = *self.parents[1];
    MapC g(self.grad.data(), rows, out);
    if (double *gx = grad_buffer(px))
      MapM(gx, rows, in).noalias() += g * MapC(pw.value.data(), in, out).transpose();
    if (double *gw = grad_buffer(pw))
      MapM(gw, in, out).noalias() += MapC(px.value.data(), rows, in).transpose() * g;
  }, "matmul_last");
}

Tensor add_bias(const Tensor &x, const Tensor &bias) {
  require_rank("add_bias", bias, 1);
  if (x.rank() < 1 || x.shape().back() != bias.dim(0))
    shape_error("add_bias", shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  const std::size_t c = bias.dim(0), rows = x.size() / c;
  std::vector<double> y(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j)
      y[r * c + j] += bias[j];
  return make_result(x.shape(), std::move(y), {x, bias}, [rows, c](Node &self) {
    if (double *gx = grad_buffer(*self.parents[0]))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gx[i] += self.grad[i];
    if (double *gb = grad_buffer(*self.parents[1]))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j)
          gb[j] += self.grad[r * c + j];
  }, "add_bias");
}

Tensor linear(const Tensor &x, const Tensor &w, const Tensor &bias) {
  return add_bias(matmul_last(x, w), bias);
}

Tensor graph_mix(const Tensor &m, const Tensor &x) {
  require_rank("graph_mix", m, 2);
  if (m.dim(0) != m.dim(1) || x.rank() < 2 || x.dim(x.rank() - 2) != m.dim(0))
    shape_error("graph_mix", shape_str(m.shape()) + " . " + shape_str(x.shape()));
  const std::size_t n = m.dim(0), c = x.shape().back(), groups = x.size() / (n * c);
  std::vector<double> y(x.size());
  MapC mm(m.values().data(), n, n);
  for (std::size_t g = 0; g < groups; ++g)
    MapM(y.data() + g * n * c, n, c).noalias() = mm * MapC(x.values().data() + g * n * c, n, c);
  return make_result(x.shape(), std::move(y), {m, x}, [n, c, groups](Node &self) {
    Node &pm = *self.parents[0];
    Node &px = *self.parents[1];
    double *gm = grad_buffer(pm);
    double *gx = grad_buffer(px);
    MapC mv(pm.value.data(), n, n);
    for (std::size_t g = 0; g < groups; ++g) {
      MapC go(self.grad.data() + g * n * c, n, c);
      if (gx)
        MapM(gx + g * n * c, n, c).noalias() += mv.transpose() * go;
      if (gm)
        MapM(gm, n, n).noalias() += go * MapC(px.value.data() + g * n * c, n, c).transpose();
    }
  }, "graph_mix");
}

Tensor scale_rows_cols(const Tensor &a, const Tensor &r) {
  require_rank("scale_rows_cols", a, 2);
  require_rank("scale_rows_cols", r, 1);
  const std::size_t n = r.dim(0);
  if (a.dim(0) != n || a.dim(1) != n)
    shape_error("scale_rows_cols", shape_str(a.shape()) + " with " + shape_str(r.shape()));
  std::vector<double> y(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      y[i * n + j] = r[i] * a[i * n + j] * r[j];
  return make_result({n, n}, std::move(y), {a, r}, [n](Node &self) {
    Node &pa = *self.parents[0];
    Node &pr = *self.parents[1];
    const auto &av = pa.value;
    const auto &rv = pr.value;
    const auto &g = self.grad;
    if (double *ga = grad_buffer(pa))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          ga[i * n + j] += g[i * n + j] * rv[i] * rv[j];
    if (double *gr = grad_buffer(pr))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double t = g[i * n + j] * av[i * n + j];
          gr[i] += t * rv[j];
          gr[j] += t * rv[i];
        }
  }, "scale_rows_cols");
}

Tensor softmax(const Tensor &a, std::size_t axis) {
  if (axis >= a.rank())
    shape_error("softmax", "axis out of range for " + shape_str(a.shape()));
  const auto s = split_at(a.shape(), axis);
  std::vector<double> y(a.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t k) { return (o * s.len + k) * s.inner + i; };
      double mx = a[at(0)];
      for (std::size_t k = 1; k < s.len; ++k)
        mx = std::max(mx, a[at(k)]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        y[at(k)] = std::exp(a[at(k)] - mx);
        z += y[at(k)];
      }
      for (std::size_t k = 0; k < s.len; ++k)
        y[at(k)] /= z;
    }
  return make_result(a.shape(), std::move(y), {a}, [s](Node &self) {
    double *ga = grad_buffer(*self.parents[0]);
    if (!ga)
      return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t k) { return (o * s.len + k) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t k = 0; k < s.len; ++k)
          dot += self.grad[at(k)] * self.value[at(k)];
        for (std::size_t k = 0; k < s.len; ++k)
          ga[at(k)] += self.value[at(k)] * (self.grad[at(k)] - dot);
      }
  }, "softmax");
}

Tensor causal_conv1d(const Tensor &x, const Tensor &w, const Tensor &bias,
                     std::size_t dilation) {
  require_rank("causal_conv1d", x, 4);
  require_rank("causal_conv1d", w, 3);
  require_rank("causal_conv1d", bias, 1);
  const std::size_t B = x.dim(0), T = x.dim(1), N = x.dim(2), ci = x.dim(3);
  const std::size_t K = w.dim(0), co = w.dim(2);
  if (w.dim(1) != ci || bias.dim(0) != co || dilation == 0)
    shape_error("causal_conv1d", shape_str(x.shape()) + " * " + shape_str(w.shape()) + " + " +
                                     shape_str(bias.shape()));
  std::vector<double> y(B * T * N * co);
  for (std::size_t r = 0; r < B * T * N; ++r)
    for (std::size_t j = 0; j < co; ++j)
      y[r * co + j] = bias[j];
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t tap = 0; tap < K; ++tap) {
      const std::size_t shift = tap * dilation;
      if (shift >= T)
        continue;
      const std::size_t rows = (T - shift) * N;
      MapM(y.data() + (b * T + shift) * N * co, rows, co).noalias() +=
          MapC(x.values().data() + b * T * N * ci, rows, ci) *
          MapC(w.values().data() + tap * ci * co, ci, co);
    }
  return make_result({B, T, N, co}, std::move(y), {x, w, bias},
                     [B, T, N, ci, co, K, dilation](Node &self) {
    Node &px = *self.parents[0];
    Node &pw = *self.parents[1];
    double *gx = grad_buffer(px);
    double *gw = grad_buffer(pw);
    if (double *gb = grad_buffer(*self.parents[2]))
      for (std::size_t r = 0; r < B * T * N; ++r)
        for (std::size_t j = 0; j < co; ++j)
          gb[j] += self.grad[r * co + j];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t tap = 0; tap < K; ++tap) {
        const std::size_t shift = tap * dilation;
        if (shift >= T)
          continue;
        const std::size_t rows = (T - shift) * N;
        MapC go(self.grad.data() + (b * T + shift) * N * co, rows, co);
        if (gx)
          MapM(gx + b * T * N * ci, rows, ci).noalias() +=
              go * MapC(pw.value.data() + tap * ci * co, ci, co).transpose();
        if (gw)
          MapM(gw + tap * ci * co, ci, co).noalias() +=
              MapC(px.value.data() + b * T * N * ci, rows, ci).transpose() * go;
      }
  }, "causal_conv1d");
}

// ---- gradient checking -----------------------------------------------------

double finite_diff_check(const std::function<Tensor()> &f, Tensor &param, double eps) {
  param.zero_grad();
  backward(f());
  std::vector<double> analytic(param.grad().begin(), param.grad().end());
  analytic.resize(param.size(), 0.0);

  auto vals = param.mutable_values();
  double worst = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double orig = vals[i];
    vals[i] = orig + eps;
    const double up = f().item();
    vals[i] = orig - eps;
    const double down = f().item();
    vals[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

double finite_diff_check(const std::function<Tensor(const Tensor &)> &f, const Tensor &x,
                         double eps) {
  Tensor p = Tensor::parameter(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
  return finite_diff_check([&] { return f(p); }, p, eps);
}

} // namespace ma2gcn::ad
