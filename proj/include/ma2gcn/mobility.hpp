#pragma once

#include "ma2gcn/grid.hpp"
#include "ma2gcn/trajectory.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ma2gcn {

struct GridEntryEvent {
  std::string taxi_id;
  std::size_t cell = 0;
  std::int64_t enter_time = 0;

  friend bool operator==(const GridEntryEvent &, const GridEntryEvent &) = default;
};

struct MobilityParams {
  double kappa = 1.0;
  std::int64_t segment_seconds = 7200;

  void validate() const;
};

struct TimeRange {
  std::int64_t start = 0; // inclusive
  std::int64_t end = 0;   // exclusive
};

/// Vehicle entry/exit matrix: per time segment, directed trip counts from an
/// exit cell i to the next entered cell j, and the mean travel time of those
/// trips in seconds (0 where there were none).
struct EntryExitMatrix {
  std::size_t S = 0, N = 0;
  std::int64_t segment_seconds = 7200;
  std::int64_t start_time = 0;
  std::vector<std::uint64_t> counts;     // S*N*N
  std::vector<double> mean_travel_time;  // S*N*N, seconds

  std::size_t index(std::size_t s, std::size_t i, std::size_t j) const { return (s * N + i) * N + j; }
  std::uint64_t count(std::size_t s, std::size_t i, std::size_t j) const { return counts[index(s, i, j)]; }
  double travel_time(std::size_t s, std::size_t i, std::size_t j) const {
    return mean_travel_time[index(s, i, j)];
  }
};

/// The first fix is an entry into its cell; afterwards an event is emitted
/// whenever consecutive fixes change cell, stamped with the entering fix's
/// time.
std::vector<GridEntryEvent> detect_grid_entries(const Trajectory &t, const GridSpec &g);

/// Consecutive entry events (i @ t_a) -> (j @ t_b) of one taxi form a trip
/// with travel time t_b - t_a, attributed to the segment containing t_a.
/// Trips departing outside `horizon` are ignored.
/// S = ceil((horizon.end - horizon.start) / segment_seconds).
EntryExitMatrix build_entry_exit_matrix(std::span<const std::vector<GridEntryEvent>> events,
                                        std::size_t N, const MobilityParams &params,
                                        const TimeRange &horizon);

/// Symmetrized kappa * count / mean_travel_minutes for segment s, zero
/// diagonal. Pairs without trips contribute 0.
AdjacencyMatrix build_mobility_adjacency(const EntryExitMatrix &e, std::size_t s,
                                         const MobilityParams &params);

} // namespace ma2gcn
