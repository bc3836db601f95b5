#pragma once

#include "ma2gcn/error.hpp"
#include "ma2gcn/matrix.hpp"
#include "ma2gcn/random.hpp"
#include "ma2gcn/tensor.hpp"

#include <doctest.h>

#include <atomic>
#include <unistd.h>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

using ma2gcn::ErrorKind;
using ma2gcn::Rng;
using ma2gcn::ad::Shape;
using ma2gcn::ad::Tensor;

#define CHECK_KIND(expr, expected_kind)                                                                            \
  do {                                                                                                             \
    bool thrown_ = false;                                                                                          \
    try {                                                                                                          \
      (void)(expr);                                                                                                \
    } catch (const ma2gcn::Error &e_) {                                                                            \
      thrown_ = true;                                                                                              \
      CHECK_MESSAGE(e_.kind() == (expected_kind), "got " << ma2gcn::to_string(e_.kind()) << ": " << e_.what());     \
    }                                                                                                              \
    CHECK_MESSAGE(thrown_, "expected " << ma2gcn::to_string(expected_kind));                                        \
  } while (0)

inline std::vector<double> random_values(Rng &rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto &x : v)
    x = rng.uniform(lo, hi);
  return v;
}

inline Tensor random_param(Rng &rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const auto n = ma2gcn::ad::numel(shape);
  return Tensor::parameter(std::move(shape), random_values(rng, n, lo, hi));
}

inline Tensor random_const(Rng &rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  const auto n = ma2gcn::ad::numel(shape);
  return Tensor::constant(std::move(shape), random_values(rng, n, lo, hi));
}

// Random symmetric nonnegative matrix with zero diagonal.
inline ma2gcn::Matrix random_adjacency(Rng &rng, std::size_t n, double density = 0.6) {
  ma2gcn::Matrix a = ma2gcn::Matrix::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < density)
        a(i, j) = a(j, i) = rng.uniform(0.1, 2.0);
  return a;
}

inline Tensor to_tensor(const ma2gcn::Matrix &m) {
  return Tensor::constant({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                          std::vector<double>(m.data(), m.data() + m.size()));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix: a = v diag(w) v^T.
inline void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double> &w,
                         std::vector<std::vector<double>> &v) {
  const std::size_t n = a.size();
  v.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off += a[p][q] * a[p][q];
    if (off < 1e-30)
      break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300)
          continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  w.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = a[i][i];
}

class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ma2gcn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace testing
