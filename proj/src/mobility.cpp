#include "ma2gcn/mobility.hpp"

#include "ma2gcn/error.hpp"

#include <algorithm>
#include <numeric>

namespace ma2gcn {

void MobilityParams::validate() const {
  if (!(kappa > 0.0))
    throw Error(ErrorKind::ConfigError, "kappa must be positive");
  if (segment_seconds <= 0)
    throw Error(ErrorKind::ConfigError, "segment_seconds must be positive");
}

std::vector<GridEntryEvent> detect_grid_entries(const Trajectory &t, const GridSpec &g) {
  std::vector<GridEntryEvent> events;
  for (const auto &p : t.points) {
    const std::size_t cell = locate_cell(p.longitude, p.latitude, g);
    if (events.empty() || events.back().cell != cell)
      events.push_back({t.taxi_id, cell, p.timestamp});
  }
  return events;
}

EntryExitMatrix build_entry_exit_matrix(std::span<const std::vector<GridEntryEvent>> events,
                                        std::size_t N, const MobilityParams &params,
                                        const TimeRange &horizon) {
  params.validate();
  if (horizon.end <= horizon.start)
    throw Error(ErrorKind::ValidationError, "empty mobility horizon");
  EntryExitMatrix e;
  e.N = N;
  e.segment_seconds = params.segment_seconds;
  e.start_time = horizon.start;
  e.S = static_cast<std::size_t>((horizon.end - horizon.start + params.segment_seconds - 1) /
                                 params.segment_seconds);
  e.counts.assign(e.S * N * N, 0);
  e.mean_travel_time.assign(e.S * N * N, 0.0);

  // Travel times are whole seconds, so integer sums are exact and the means
  // do not depend on taxi processing order.
  std::vector<std::int64_t> total(e.S * N * N, 0);
  for (const auto &taxi : events)
    for (std::size_t k = 1; k < taxi.size(); ++k) {
      const auto &from = taxi[k - 1];
      const auto &to = taxi[k];
      if (from.cell == to.cell)
        continue;
      if (from.cell >= N || to.cell >= N)
        throw Error(ErrorKind::OutOfBounds, "entry event cell outside [0, N)");
      if (from.enter_time < horizon.start || from.enter_time >= horizon.end)
        continue;
      const auto s = static_cast<std::size_t>((from.enter_time - horizon.start) / params.segment_seconds);
      const std::size_t idx = e.index(s, from.cell, to.cell);
      ++e.counts[idx];
      total[idx] += to.enter_time - from.enter_time;
    }
  for (std::size_t idx = 0; idx < total.size(); ++idx)
    if (e.counts[idx] > 0)
      e.mean_travel_time[idx] = static_cast<double>(total[idx]) / static_cast<double>(e.counts[idx]);
  return e;
}

AdjacencyMatrix build_mobility_adjacency(const EntryExitMatrix &e, std::size_t s,
                                         const MobilityParams &params) {
  params.validate();
  if (s >= e.S)
    throw Error(ErrorKind::ValidationError,
                "mobility segment " + std::to_string(s) + " out of range [0, " + std::to_string(e.S) + ")");
  const std::size_t N = e.N;
  Matrix raw = Matrix::Zero(N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const auto c = e.count(s, i, j);
      const double minutes = e.travel_time(s, i, j) / 60.0;
      if (c > 0 && minutes > 0.0)
        raw(i, j) = params.kappa * static_cast<double>(c) / minutes;
    }
  AdjacencyMatrix a{0.5 * (raw + raw.transpose()), AdjacencyKind::Mobility};
  a.values.diagonal().setZero();
  return a;
}

} // namespace ma2gcn
