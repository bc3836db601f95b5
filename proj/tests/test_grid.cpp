#include "support.hpp"

#include "ma2gcn/grid.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace ma2gcn;
using namespace testing;

namespace {

GridSpec unit_grid(std::size_t M, std::int64_t interval = 300) { return GridSpec{{0, 0, 1, 1}, M, interval}; }

GpsPoint pt(const std::string &id, std::int64_t t, double lon, double lat, double speed) {
  return {id, t, lon, lat, speed, 0.0, 0};
}

std::vector<Trajectory> random_trajectories(Rng &rng, std::size_t taxis, std::size_t points) {
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < taxis; ++k) {
    Trajectory t{"v" + std::to_string(k), {}};
    std::int64_t time = 1000 + static_cast<std::int64_t>(rng.below(200));
    for (std::size_t i = 0; i < points; ++i) {
      time += 1 + static_cast<std::int64_t>(rng.below(120));
      t.points.push_back(pt(t.taxi_id, time, rng.uniform(), rng.uniform(), rng.uniform(0.0, 60.0)));
    }
    out.push_back(std::move(t));
  }
  return out;
}

} // namespace

TEST_SUITE("grid") {

TEST_CASE("cell lookup") {
  const auto g = unit_grid(2);
  CHECK(locate_cell(0.25, 0.75, g) == 2);
  CHECK(locate_cell(1.0, 1.0, g) == 3);
  CHECK(locate_cell(0.0, 0.0, g) == 0);
  CHECK(locate_cell(0.75, 0.25, g) == 1);
  CHECK_KIND(locate_cell(2.0, 0.5, g), ErrorKind::OutOfBounds);
}

TEST_CASE("grid spec validation") {
  CHECK_KIND((GridSpec{{0, 0, 1, 1}, 0, 300}.validate()), ErrorKind::ConfigError);
  CHECK_KIND((GridSpec{{1, 0, 0, 1}, 2, 300}.validate()), ErrorKind::ConfigError);
  CHECK_KIND((GridSpec{{0, 0, 1, 1}, 2, 0}.validate()), ErrorKind::ConfigError);
}

TEST_CASE("initial adjacency geometry") {
  const auto a2 = build_initial_adjacency(unit_grid(2)).values;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(a2(i, j) == (i == j ? 0.0 : 1.0));

  const auto a3 = build_initial_adjacency(unit_grid(3)).values;
  CHECK(a3.row(4).sum() == 8.0);
  CHECK(a3.row(0).sum() == 3.0);
  CHECK(a3.row(1).sum() == 5.0);
  CHECK(a3 == a3.transpose());
  CHECK(a3.diagonal().isZero());

  const auto a1 = build_initial_adjacency(unit_grid(1)).values;
  CHECK(a1.rows() == 1);
  CHECK(a1(0, 0) == 0.0);
}

TEST_CASE("initial adjacency matches a Chebyshev-distance oracle") {
  for (std::size_t M : {1u, 2u, 4u, 7u}) {
    const auto a = build_initial_adjacency(unit_grid(M)).values;
    for (std::size_t i = 0; i < M * M; ++i)
      for (std::size_t j = 0; j < M * M; ++j) {
        const long dr = std::labs(long(i / M) - long(j / M)), dc = std::labs(long(i % M) - long(j % M));
        CHECK(a(i, j) == ((std::max(dr, dc) == 1) ? 1.0 : 0.0));
      }
  }
}

TEST_CASE("squared adjacency") {
  AdjacencyMatrix a{Matrix{{0, 1}, {1, 0}}, AdjacencyKind::Initial};
  const auto sq = square_adjacency(a);
  CHECK(sq.values == Matrix::Identity(2, 2));
  CHECK(sq.kind == AdjacencyKind::Squared);
  CHECK(square_adjacency(build_initial_adjacency(unit_grid(1))).values(0, 0) == 0.0);

  const auto a3 = build_initial_adjacency(unit_grid(3));
  const auto s3 = square_adjacency(a3).values;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 9; ++k)
        acc += a3.values(i, k) * a3.values(k, j);
      CHECK(s3(i, j) == acc);
    }
  CHECK(s3(0, 0) == 3.0);
}

TEST_CASE("aggregation: mean speed and distinct-taxi flow") {
  const auto g = unit_grid(2);
  std::vector<Trajectory> two_taxis = {{"a", {pt("a", 600, 0.1, 0.1, 30.0)}}, {"b", {pt("b", 610, 0.2, 0.2, 50.0)}}};
  auto x = aggregate_features(two_taxis, g);
  CHECK(x.T == 1);
  CHECK(x.start_time == 600);
  CHECK(x.at(0, 0, FeatureTensor::kSpeed) == 40.0);
  CHECK(x.at(0, 0, FeatureTensor::kFlow) == 2.0);
  CHECK(x.observed(0, 0));
  CHECK_FALSE(x.observed(0, 3));
  CHECK(x.at(0, 3, FeatureTensor::kFlow) == 0.0);

  std::vector<Trajectory> one_taxi = {{"a", {pt("a", 600, 0.1, 0.1, 20.0), pt("a", 630, 0.1, 0.2, 40.0)}}};
  x = aggregate_features(one_taxi, g);
  CHECK(x.at(0, 0, FeatureTensor::kSpeed) == 30.0);
  CHECK(x.at(0, 0, FeatureTensor::kFlow) == 1.0);

  CHECK_KIND(aggregate_features(std::vector<Trajectory>{}, g), ErrorKind::EmptyInput);
}

TEST_CASE("aggregation: interval alignment and length") {
  const auto g = unit_grid(1, 300);
  std::vector<Trajectory> t = {{"a", {pt("a", 610, 0.5, 0.5, 1.0), pt("a", 1199, 0.5, 0.5, 3.0),
                                      pt("a", 1200, 0.5, 0.5, 5.0)}}};
  const auto x = aggregate_features(t, g);
  CHECK(x.start_time == 600);
  CHECK(x.T == 3);
  CHECK(x.at(0, 0, 0) == 1.0);
  CHECK(x.at(1, 0, 0) == 3.0);
  CHECK(x.at(2, 0, 0) == 5.0);
}

TEST_CASE("aggregation matches a brute-force oracle and ignores input order") {
  Rng rng(21);
  const auto g = unit_grid(3, 120);
  auto trajs = random_trajectories(rng, 8, 60);
  const auto x = aggregate_features(trajs, g);

  std::int64_t first = INT64_MAX;
  for (const auto &t : trajs)
    for (const auto &p : t.points)
      first = std::min(first, p.timestamp);
  const std::int64_t start = first - first % 120;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> speeds;
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::string>> ids;
  for (const auto &t : trajs)
    for (const auto &p : t.points) {
      const std::size_t col = std::min<std::size_t>(2, static_cast<std::size_t>(p.longitude * 3));
      const std::size_t row = std::min<std::size_t>(2, static_cast<std::size_t>(p.latitude * 3));
      const auto key = std::make_pair(static_cast<std::size_t>((p.timestamp - start) / 120), row * 3 + col);
      speeds[key].push_back(p.speed);
      ids[key].insert(p.taxi_id);
    }
  for (std::size_t t = 0; t < x.T; ++t)
    for (std::size_t n = 0; n < 9; ++n) {
      const auto it = speeds.find({t, n});
      CHECK(x.observed(t, n) == (it != speeds.end()));
      if (it == speeds.end())
        continue;
      double mean = 0.0;
      for (double s : it->second)
        mean += s;
      mean /= static_cast<double>(it->second.size());
      CHECK(x.at(t, n, 0) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(x.at(t, n, 1) == static_cast<double>(ids[{t, n}].size()));
    }

  auto shuffled = trajs;
  rng.shuffle(shuffled);
  const auto y = aggregate_features(shuffled, g);
  CHECK(y.values == x.values);
  CHECK(y.mask == x.mask);
}

TEST_CASE("normalization") {
  FeatureTensor x;
  x.T = 2;
  x.N = 1;
  x.values = {2, 2, 4, 4};
  x.mask = {1, 1};
  const auto s = fit_feature_stats(x, 2);
  CHECK(s.mean[0] == 3.0);
  CHECK(s.stddev[0] == 1.0);
  CHECK_FALSE(s.degenerate[0]);
  const auto z = normalize(x, s);
  CHECK(z.values == std::vector<double>{-1, -1, 1, 1});

  Rng rng(4);
  FeatureTensor r;
  r.T = 20;
  r.N = 3;
  r.values = random_values(rng, 120, 0.0, 50.0);
  r.mask.assign(60, 1);
  const auto rs = fit_feature_stats(r, 20);
  const auto back = denormalize(normalize(r, rs), rs);
  CHECK(max_abs_diff(back.values, r.values) < 1e-12);
}

TEST_CASE("constant features take the degenerate path") {
  FeatureTensor x;
  x.T = 3;
  x.N = 2;
  x.values.assign(12, 7.0);
  x.mask.assign(6, 1);
  const auto s = fit_feature_stats(x, 3);
  CHECK(s.degenerate[0]);
  CHECK(s.degenerate[1]);
  CHECK(s.stddev[0] == 1.0);
  for (double v : normalize(x, s).values)
    CHECK(v == 0.0);
}

TEST_CASE("statistics use the training range and observed cells only") {
  FeatureTensor x;
  x.T = 4;
  x.N = 2;
  // cell 0 observed at t=0,1 (speeds 10, 20); cell 1 never observed; t>=2 outside the fit range
  x.values = {10, 1, 0, 0, 20, 3, 0, 0, 1000, 50, 1000, 50};
  x.mask = {1, 0, 1, 0, 1, 1, 1, 1};
  const auto s = fit_feature_stats(x, 2);
  CHECK(s.fit_intervals == 2);
  CHECK(s.mean[0] == 15.0);
  CHECK(s.mean[1] == 2.0);
  CHECK(s.cell_speed_mean[0] == 15.0);
  CHECK(s.cell_speed_mean[1] == 15.0); // global fallback

  const auto filled = fill_missing_speed(x, s);
  CHECK(filled.at(0, 1, 0) == 15.0);
  CHECK(filled.at(0, 1, 1) == 0.0);
  CHECK(filled.at(2, 0, 0) == 1000.0); // observed values are untouched
  CHECK_KIND(fit_feature_stats(x, 0), ErrorKind::EmptyInput);
}

} // TEST_SUITE
