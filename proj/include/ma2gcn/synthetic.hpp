#pragma once

#include "ma2gcn/grid.hpp"
#include "ma2gcn/trajectory.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ma2gcn {

/// A recurring daily slowdown: inside `cells` between the local hours
/// [start_hour, end_hour) every taxi moves at `slowdown` times its speed.
struct RushWindow {
  double start_hour = 8.0;
  double end_hour = 9.0;
  std::vector<std::size_t> cells;
  double slowdown = 0.3;
};

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t taxis = 50;
  double hours = 72.0;
  GridSpec grid{{121.40, 31.17, 121.55, 31.30}, 5, 300};
  std::vector<RushWindow> rush_hours;
  std::int64_t sample_period_seconds = 30;
  std::int64_t start_epoch = 1171900800; // 2007-02-20 00:00:00 +08:00
  std::int64_t utc_offset_seconds = 8 * 3600; // local day boundary for rush windows
  double cruise_min_kmh = 30.0;
  double cruise_max_kmh = 40.0;
  double cell_factor_min = 0.7; // static per-cell street-class speed factor
  double cell_factor_max = 1.2;
  double dwell_probability = 1.0;   // chance of stopping at a waypoint
  double dwell_max_seconds = 120.0; // stop length, reporting speed 0
  double speed_noise_kmh = 1.0;

  /// M = 5 grid, 50 taxis, 72 h, 30 s fixes; the centre 3x3 block slows to
  /// 0.3x from 08:00 to 09:00 and to 0.5x from 17:00 to 19:00.
  static SynthConfig defaults();
  /// Throws ConfigError.
  void validate() const;
};

/// Random-waypoint taxis; deterministic for a given config (each taxi uses
/// its own stream derived from the seed). Taxi ids are "taxi0000", ...
std::vector<Trajectory> generate(const SynthConfig &cfg);

/// Per-cell static speed factors drawn for `cfg` (exposed for tests).
std::vector<double> cell_speed_factors(const SynthConfig &cfg);

/// Slowdown in effect for `cell` at epoch time `t` (1 when none applies).
double slowdown_at(const SynthConfig &cfg, std::size_t cell, std::int64_t t);

/// One "<taxi_id>.txt" per trajectory in the 7-field comma format.
void write_trajectory_text(const std::filesystem::path &dir, const std::vector<Trajectory> &trajs,
                           const TimeZone &tz);

} // namespace ma2gcn
