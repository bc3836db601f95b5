#include "ma2gcn/grid.hpp"

#include "ma2gcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

namespace ma2gcn {

void GridSpec::validate() const {
  if (!bbox.valid())
    throw Error(ErrorKind::ConfigError, "grid bbox must satisfy lon_min < lon_max and lat_min < lat_max");
  if (M < 1)
    throw Error(ErrorKind::ConfigError, "grid size M must be >= 1");
  if (interval_seconds <= 0)
    throw Error(ErrorKind::ConfigError, "interval_seconds must be positive");
}

std::size_t locate_cell(double lon, double lat, const GridSpec &g) {
  if (!g.bbox.contains(lon, lat))
    throw Error(ErrorKind::OutOfBounds,
                "point (" + std::to_string(lon) + ", " + std::to_string(lat) + ") outside grid bbox");
  const auto last = static_cast<double>(g.M - 1);
  const double col = std::min(std::floor((lon - g.bbox.lon_min) / g.cell_width()), last);
  const double row = std::min(std::floor((lat - g.bbox.lat_min) / g.cell_height()), last);
  return static_cast<std::size_t>(row) * g.M + static_cast<std::size_t>(col);
}

AdjacencyMatrix build_initial_adjacency(const GridSpec &g) {
  const std::size_t M = g.M, N = g.N();
  AdjacencyMatrix a{Matrix::Zero(N, N), AdjacencyKind::Initial};
  for (std::size_t r = 0; r < M; ++r)
    for (std::size_t c = 0; c < M; ++c) {
      const std::size_t i = r * M + c;
      for (std::size_t rr = r > 0 ? r - 1 : 0; rr <= std::min(r + 1, M - 1); ++rr)
        for (std::size_t cc = c > 0 ? c - 1 : 0; cc <= std::min(c + 1, M - 1); ++cc) {
          const std::size_t j = rr * M + cc;
          if (j != i)
            a.values(i, j) = 1.0;
        }
    }
  return a;
}

AdjacencyMatrix square_adjacency(const AdjacencyMatrix &a) {
  return {a.values * a.values, AdjacencyKind::Squared};
}

FeatureTensor aggregate_features(std::span<const Trajectory> trajs, const GridSpec &g) {
  g.validate();
  std::int64_t first = 0, last = 0;
  bool any = false;
  for (const auto &t : trajs)
    for (const auto &p : t.points) {
      first = any ? std::min(first, p.timestamp) : p.timestamp;
      last = any ? std::max(last, p.timestamp) : p.timestamp;
      any = true;
    }
  if (!any)
    throw Error(ErrorKind::EmptyInput, "no GPS points to aggregate");

  const std::int64_t iv = g.interval_seconds;
  auto floor_div = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };

  FeatureTensor x;
  x.N = g.N();
  x.interval_seconds = iv;
  x.start_time = floor_div(first, iv) * iv;
  x.T = static_cast<std::size_t>((last + 1 - x.start_time + iv - 1) / iv);
  x.values.assign(x.T * x.N * x.D, 0.0);
  x.mask.assign(x.T * x.N, 0);

  // Canonical order makes the floating-point sums independent of input order.
  std::vector<std::size_t> order(trajs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &ta = trajs[a], &tb = trajs[b];
    if (ta.taxi_id != tb.taxi_id)
      return ta.taxi_id < tb.taxi_id;
    auto key = [](const GpsPoint &p) { return std::tuple(p.timestamp, p.longitude, p.latitude, p.speed); };
    return std::lexicographical_compare(ta.points.begin(), ta.points.end(), tb.points.begin(), tb.points.end(),
                                        [&](const GpsPoint &p, const GpsPoint &q) { return key(p) < key(q); });
  });

  std::vector<std::size_t> point_count(x.T * x.N, 0);
  std::vector<std::int64_t> last_taxi(x.T * x.N, -1);
  std::int64_t taxi_ordinal = -1;
  const std::string *prev_id = nullptr;
  for (std::size_t idx : order) {
    const auto &t = trajs[idx];
    if (!prev_id || *prev_id != t.taxi_id)
      ++taxi_ordinal;
    prev_id = &t.taxi_id;
    for (const auto &p : t.points) {
      const auto ti = static_cast<std::size_t>((p.timestamp - x.start_time) / iv);
      const std::size_t n = locate_cell(p.longitude, p.latitude, g);
      const std::size_t k = ti * x.N + n;
      x.at(ti, n, FeatureTensor::kSpeed) += p.speed;
      ++point_count[k];
      if (last_taxi[k] != taxi_ordinal) {
        last_taxi[k] = taxi_ordinal;
        x.at(ti, n, FeatureTensor::kFlow) += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < x.T * x.N; ++k)
    if (point_count[k] > 0) {
      x.values[k * x.D + FeatureTensor::kSpeed] /= static_cast<double>(point_count[k]);
      x.mask[k] = 1;
    }
  return x;
}

FeatureStats fit_feature_stats(const FeatureTensor &x, std::size_t train_intervals) {
  const std::size_t T = std::min(train_intervals, x.T);
  FeatureStats s;
  s.fit_intervals = T;
  std::array<double, 2> sum{0.0, 0.0};
  std::size_t count = 0;
  std::vector<double> cell_sum(x.N, 0.0);
  std::vector<std::size_t> cell_count(x.N, 0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < x.N; ++n) {
      if (!x.observed(t, n))
        continue;
      ++count;
      for (std::size_t d = 0; d < 2; ++d)
        sum[d] += x.at(t, n, d);
      cell_sum[n] += x.at(t, n, FeatureTensor::kSpeed);
      ++cell_count[n];
    }
  if (count == 0)
    throw Error(ErrorKind::EmptyInput, "no observed cells in the training range");
  for (std::size_t d = 0; d < 2; ++d)
    s.mean[d] = sum[d] / static_cast<double>(count);

  std::array<double, 2> sq{0.0, 0.0};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t n = 0; n < x.N; ++n)
      if (x.observed(t, n))
        for (std::size_t d = 0; d < 2; ++d) {
          const double e = x.at(t, n, d) - s.mean[d];
          sq[d] += e * e;
        }
  for (std::size_t d = 0; d < 2; ++d) {
    s.stddev[d] = std::sqrt(sq[d] / static_cast<double>(count));
    if (!(s.stddev[d] > 0.0)) {
      s.stddev[d] = 1.0;
      s.degenerate[d] = true;
      std::cerr << "warning: DegenerateStats: feature " << d << " has zero variance; using std = 1\n";
    }
  }
  s.global_speed_mean = s.mean[FeatureTensor::kSpeed];
  s.cell_speed_mean.resize(x.N);
  for (std::size_t n = 0; n < x.N; ++n)
    s.cell_speed_mean[n] =
        cell_count[n] ? cell_sum[n] / static_cast<double>(cell_count[n]) : s.global_speed_mean;
  return s;
}

FeatureTensor fill_missing_speed(const FeatureTensor &x, const FeatureStats &stats) {
  FeatureTensor out = x;
  for (std::size_t t = 0; t < x.T; ++t)
    for (std::size_t n = 0; n < x.N; ++n)
      if (!x.observed(t, n))
        out.at(t, n, FeatureTensor::kSpeed) = stats.cell_speed_mean.at(n);
  return out;
}

FeatureTensor normalize(const FeatureTensor &x, const FeatureStats &stats) {
  FeatureTensor out = x;
  for (std::size_t k = 0; k < x.T * x.N; ++k)
    for (std::size_t d = 0; d < x.D; ++d)
      out.values[k * x.D + d] = stats.normalize_value(x.values[k * x.D + d], d);
  return out;
}

FeatureTensor denormalize(const FeatureTensor &x, const FeatureStats &stats) {
  FeatureTensor out = x;
  for (std::size_t k = 0; k < x.T * x.N; ++k)
    for (std::size_t d = 0; d < x.D; ++d)
      out.values[k * x.D + d] = stats.denormalize_value(x.values[k * x.D + d], d);
  return out;
}

NormalizedFeatures fill_and_normalize(const FeatureTensor &x, std::size_t train_intervals) {
  NormalizedFeatures r;
  r.stats = fit_feature_stats(x, train_intervals);
  r.features = normalize(fill_missing_speed(x, r.stats), r.stats);
  return r;
}

} // namespace ma2gcn
