#pragma once

// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto an immutable node of a computation graph.
// Every op that receives at least one gradient-tracked input records its
// parents and an adjoint closure; backward() linearizes the reachable graph
// into a Tape and replays the adjoints in reverse. Only parameter leaves may
// be mutated in place (by optimizers and finite-difference probes).
//
// Layout is row-major. There is no implicit broadcasting: ops document the
// exact shapes they accept and throw ErrorKind::ShapeMismatch otherwise.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ma2gcn::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape &shape);
std::string shape_str(const Shape &shape);

namespace detail {
struct Node;
}

class Tensor {
public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor eye(std::size_t n);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape &shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t size() const;

  std::span<const double> values() const;
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;

  // Leaves only; used by optimizers and finite-difference probes.
  std::span<double> mutable_values();
  void zero_grad();
  void scale_grad(double factor);

  // Same values, no history.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(detail::Node &)>, const char *);

  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the nodes reachable from a loss, parents before children.
class Tape {
public:
  static Tape record(const Tensor &root);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<detail::Node>> &nodes() const { return order_; }

  // Seeds d(root)/d(root) = 1 and runs every adjoint in reverse order.
  void replay_adjoints();

private:
  std::vector<std::shared_ptr<detail::Node>> order_;
};

// Populates grad() on every tracked leaf reachable from loss. Leaf gradients
// accumulate across calls until zero_grad(); interior gradients are reset on
// each call. Throws NotScalar unless loss has exactly one element.
void backward(const Tensor &loss);

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b); // Hadamard product
Tensor scale(const Tensor &a, double factor);
Tensor add_scalar(const Tensor &a, double offset);
Tensor tanh(const Tensor &a);
Tensor sigmoid(const Tensor &a);
Tensor relu(const Tensor &a);
Tensor abs(const Tensor &a); // subgradient 0 at 0
Tensor inv_sqrt_or_zero(const Tensor &a); // x > 0 ? x^-1/2 : 0

inline Tensor operator+(const Tensor &a, const Tensor &b) { return add(a, b); }
inline Tensor operator-(const Tensor &a, const Tensor &b) { return sub(a, b); }
inline Tensor operator*(const Tensor &a, const Tensor &b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor &a) { return scale(a, s); }

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor &a);  // -> scalar (shape {1})
Tensor mean(const Tensor &a); // -> scalar (shape {1})
Tensor sum_last(const Tensor &a); // (..., n) -> (...)

// ---- shape ---------------------------------------------------------------

Tensor reshape(const Tensor &a, Shape shape);
Tensor transpose(const Tensor &a); // rank 2 only
Tensor permute(const Tensor &a, const std::vector<std::size_t> &axes);
Tensor stack(const std::vector<Tensor> &parts); // new leading axis
// Removes `axis` by selecting one index along it.
Tensor take(const Tensor &a, std::size_t axis, std::size_t index);

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor &a, const Tensor &b); // (m,k)x(k,n)
// (..., in) x (in, out) -> (..., out)
Tensor matmul_last(const Tensor &x, const Tensor &w);
// x (..., c) + bias (c)
Tensor add_bias(const Tensor &x, const Tensor &bias);
Tensor linear(const Tensor &x, const Tensor &w, const Tensor &bias);
// m (n,n), x (..., n, c): out[g] = m * x[g] for every leading index g.
Tensor graph_mix(const Tensor &m, const Tensor &x);
// out_ij = r_i * a_ij * r_j for square a (n,n) and r (n).
Tensor scale_rows_cols(const Tensor &a, const Tensor &r);

// Softmax along `axis`, stabilized by subtracting the running max.
Tensor softmax(const Tensor &a, std::size_t axis);

// Dilated causal convolution along the time axis.
// x (B,T,N,Cin), w (K,Cin,Cout), bias (Cout) -> (B,T,N,Cout)
// out[b,t,n] = bias + sum_j x[b, t - j*dilation, n] * w[j]; taps that fall
// before t = 0 read zeros (left padding (K-1)*dilation), so T is preserved.
Tensor causal_conv1d(const Tensor &x, const Tensor &w, const Tensor &bias,
                     std::size_t dilation);

// ---- gradient checking ---------------------------------------------------

// Central-difference probe of a scalar function of one parameter leaf.
// Returns max_i |g_ad - g_fd| / max(1, |g_fd|). The leaf's values are
// restored and its gradient is left as the autodiff result.
double finite_diff_check(const std::function<Tensor()> &f, Tensor &param, double eps);

// Convenience form for a function of a single input.
double finite_diff_check(const std::function<Tensor(const Tensor &)> &f,
                         const Tensor &x, double eps);

} // namespace ma2gcn::ad
