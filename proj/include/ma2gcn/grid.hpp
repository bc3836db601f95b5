#pragma once

#include "ma2gcn/matrix.hpp"
#include "ma2gcn/trajectory.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ma2gcn {

/// Uniform M x M partition of a bounding box. Cell index = row * M + col with
/// row 0 at the southern edge and col 0 at the western edge.
struct GridSpec {
  BBox bbox;
  std::size_t M = 15;
  std::int64_t interval_seconds = 300;

  std::size_t N() const { return M * M; }
  double cell_width() const { return (bbox.lon_max - bbox.lon_min) / static_cast<double>(M); }
  double cell_height() const { return (bbox.lat_max - bbox.lat_min) / static_cast<double>(M); }
  /// Throws ConfigError on an empty box, M = 0 or a non-positive interval.
  void validate() const;
};

/// Throws OutOfBounds outside the box. Points on the max edges land in the
/// last row / column.
std::size_t locate_cell(double lon, double lat, const GridSpec &g);

enum class AdjacencyKind { Initial, Squared, Mobility, Dynamic, Aggregated };

struct AdjacencyMatrix {
  Matrix values;
  AdjacencyKind kind = AdjacencyKind::Initial;
};

/// 8-neighbourhood adjacency: A[i][j] = 1 iff i != j and the cells are within
/// Chebyshev distance 1.
AdjacencyMatrix build_initial_adjacency(const GridSpec &g);

/// A * A (2-hop walk counts).
AdjacencyMatrix square_adjacency(const AdjacencyMatrix &a);

/// X in R^{T x N x D}, D = 2 (0: mean speed km/h, 1: distinct-taxi flow).
struct FeatureTensor {
  static constexpr std::size_t kSpeed = 0;
  static constexpr std::size_t kFlow = 1;

  std::size_t T = 0, N = 0, D = 2;
  std::int64_t start_time = 0;
  std::int64_t interval_seconds = 300;
  std::vector<double> values;     // T*N*D
  std::vector<std::uint8_t> mask; // T*N, 1 where the cell saw at least one fix

  double &at(std::size_t t, std::size_t n, std::size_t d) { return values[(t * N + n) * D + d]; }
  double at(std::size_t t, std::size_t n, std::size_t d) const { return values[(t * N + n) * D + d]; }
  bool observed(std::size_t t, std::size_t n) const { return mask[t * N + n] != 0; }
};

/// Per-interval, per-cell mean speed and distinct-taxi count. Intervals are
/// aligned to multiples of g.interval_seconds (epoch-based);
/// T = ceil((last_fix + 1 - start) / interval). Unobserved cells carry speed 0
/// and mask 0 until fill_missing_speed(). The result does not depend on the
/// order of `trajs`. Throws EmptyInput when there are no points.
FeatureTensor aggregate_features(std::span<const Trajectory> trajs, const GridSpec &g);

struct FeatureStats {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> stddev{1.0, 1.0};
  std::array<bool, 2> degenerate{false, false}; // std was 0 and replaced by 1
  std::vector<double> cell_speed_mean;          // per cell; global mean if never observed
  double global_speed_mean = 0.0;
  std::size_t fit_intervals = 0;                // intervals [0, fit_intervals) were used

  double normalize_value(double v, std::size_t d) const { return (v - mean[d]) / stddev[d]; }
  double denormalize_value(double z, std::size_t d) const { return z * stddev[d] + mean[d]; }
};

/// Statistics over intervals [0, train_intervals) restricted to observed
/// entries. std is the population standard deviation. A zero std is replaced
/// by 1 and flagged (DegenerateStats). Throws EmptyInput when nothing was
/// observed in range.
FeatureStats fit_feature_stats(const FeatureTensor &x, std::size_t train_intervals);

/// Replaces unobserved speeds with the cell's training mean.
FeatureTensor fill_missing_speed(const FeatureTensor &x, const FeatureStats &stats);
FeatureTensor normalize(const FeatureTensor &x, const FeatureStats &stats);
FeatureTensor denormalize(const FeatureTensor &x, const FeatureStats &stats);

struct NormalizedFeatures {
  FeatureTensor features;
  FeatureStats stats;
};

/// fit_feature_stats + fill_missing_speed + normalize.
NormalizedFeatures fill_and_normalize(const FeatureTensor &x, std::size_t train_intervals);

} // namespace ma2gcn
