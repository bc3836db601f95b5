#include "ma2gcn/synthetic.hpp"

#include "ma2gcn/error.hpp"
#include "ma2gcn/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace ma2gcn {

namespace {

constexpr double kKmPerDegLat = 111.32;

} // namespace

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  std::vector<std::size_t> centre;
  for (std::size_t r = 1; r <= 3; ++r)
    for (std::size_t col = 1; col <= 3; ++col)
      centre.push_back(r * c.grid.M + col);
  c.rush_hours = {{8.0, 9.0, centre, 0.3}, {17.0, 19.0, centre, 0.5}};
  return c;
}

void SynthConfig::validate() const {
  grid.validate();
  if (taxis == 0 || !(hours > 0.0))
    throw Error(ErrorKind::ConfigError, "synth needs taxis > 0 and hours > 0");
  if (sample_period_seconds < 1)
    throw Error(ErrorKind::ConfigError, "sample_period_seconds must be >= 1");
  if (!(cruise_min_kmh > 0.0) || cruise_max_kmh < cruise_min_kmh)
    throw Error(ErrorKind::ConfigError, "cruise speed range invalid");
  if (!(cell_factor_min > 0.0) || cell_factor_max < cell_factor_min)
    throw Error(ErrorKind::ConfigError, "cell factor range invalid");
  if (!(dwell_probability >= 0.0 && dwell_probability <= 1.0))
    throw Error(ErrorKind::ConfigError, "dwell_probability must lie in [0, 1]");
  if (dwell_max_seconds < 0.0 || speed_noise_kmh < 0.0)
    throw Error(ErrorKind::ConfigError, "dwell and noise must be non-negative");
  for (const auto &r : rush_hours) {
    if (!(r.slowdown > 0.0 && r.slowdown <= 1.0))
      throw Error(ErrorKind::ConfigError, "rush slowdown must lie in (0, 1]");
    if (!(r.start_hour >= 0.0 && r.end_hour <= 24.0 && r.start_hour < r.end_hour))
      throw Error(ErrorKind::ConfigError, "rush window hours must satisfy 0 <= start < end <= 24");
    for (auto c : r.cells)
      if (c >= grid.N())
        throw Error(ErrorKind::ConfigError, "rush cell outside the grid");
  }
}

std::vector<double> cell_speed_factors(const SynthConfig &cfg) {
  Rng rng(Rng::derive(cfg.seed, 0xce11));
  std::vector<double> f(cfg.grid.N());
  for (auto &v : f)
    v = rng.uniform(cfg.cell_factor_min, cfg.cell_factor_max);
  return f;
}

double slowdown_at(const SynthConfig &cfg, std::size_t cell, std::int64_t t) {
  const std::int64_t local = t + cfg.utc_offset_seconds;
  const double hour = static_cast<double>(((local % 86400) + 86400) % 86400) / 3600.0;
  double factor = 1.0;
  for (const auto &r : cfg.rush_hours)
    if (hour >= r.start_hour && hour < r.end_hour &&
        std::find(r.cells.begin(), r.cells.end(), cell) != r.cells.end())
      factor = std::min(factor, r.slowdown);
  return factor;
}

std::vector<Trajectory> generate(const SynthConfig &cfg) {
  cfg.validate();
  const auto &box = cfg.grid.bbox;
  const double mid_lat = 0.5 * (box.lat_min + box.lat_max);
  const double km_per_deg_lon = kKmPerDegLat * std::cos(mid_lat * std::numbers::pi / 180.0);
  const auto factors = cell_speed_factors(cfg);
  const auto duration = static_cast<std::int64_t>(cfg.hours * 3600.0);
  const double dt = static_cast<double>(cfg.sample_period_seconds);

  std::vector<Trajectory> out(cfg.taxis);
  for (std::size_t k = 0; k < cfg.taxis; ++k) {
    Rng rng(Rng::derive(cfg.seed, k));
    char id[16];
    std::snprintf(id, sizeof id, "taxi%04zu", k);
    Trajectory &traj = out[k];
    traj.taxi_id = id;

    // positions in km east/north of the south-west corner
    const double width = (box.lon_max - box.lon_min) * km_per_deg_lon;
    const double height = (box.lat_max - box.lat_min) * kKmPerDegLat;
    double x = rng.uniform(0.0, width), y = rng.uniform(0.0, height);
    double wx = rng.uniform(0.0, width), wy = rng.uniform(0.0, height);
    double cruise = rng.uniform(cfg.cruise_min_kmh, cfg.cruise_max_kmh);
    int status = static_cast<int>(rng.below(2));
    double dwell_left = 0.0;
    double heading = 0.0;
    // stagger the first fix so taxis are not sampled in lockstep
    const auto phase = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(cfg.sample_period_seconds)));

    for (std::int64_t t = cfg.start_epoch + phase; t < cfg.start_epoch + duration; t += cfg.sample_period_seconds) {
      const double lon = std::clamp(box.lon_min + x / km_per_deg_lon, box.lon_min, box.lon_max);
      const double lat = std::clamp(box.lat_min + y / kKmPerDegLat, box.lat_min, box.lat_max);
      const std::size_t cell = locate_cell(lon, lat, cfg.grid);
      const double speed = dwell_left > 0.0 ? 0.0 : cruise * factors[cell] * slowdown_at(cfg, cell, t);
      const double reported = std::max(0.0, speed + (speed > 0.0 ? cfg.speed_noise_kmh * rng.normal() : 0.0));
      traj.points.push_back({traj.taxi_id, t, lon, lat, reported, heading, status});

      // advance to the next fix
      if (dwell_left > 0.0) {
        dwell_left -= dt;
        if (dwell_left <= 0.0) {
          wx = rng.uniform(0.0, width);
          wy = rng.uniform(0.0, height);
          cruise = rng.uniform(cfg.cruise_min_kmh, cfg.cruise_max_kmh);
          status = static_cast<int>(rng.below(2));
        }
        continue;
      }
      const double dx = wx - x, dy = wy - y;
      const double dist = std::hypot(dx, dy);
      const double step = speed * dt / 3600.0;
      if (dist > 0.0) {
        heading = std::fmod(std::atan2(dx, dy) * 180.0 / std::numbers::pi + 360.0, 360.0);
        if (heading >= 360.0)
          heading = 0.0;
      }
      if (step >= dist) {
        x = wx;
        y = wy;
        dwell_left = rng.uniform() < cfg.dwell_probability ? rng.uniform(0.0, cfg.dwell_max_seconds) : 0.0;
        if (dwell_left <= 0.0) {
          wx = rng.uniform(0.0, width);
          wy = rng.uniform(0.0, height);
        }
      } else {
        x += dx / dist * step;
        y += dy / dist * step;
      }
    }
  }
  return out;
}

void write_trajectory_text(const std::filesystem::path &dir, const std::vector<Trajectory> &trajs,
                           const TimeZone &tz) {
  std::filesystem::create_directories(dir);
  for (const auto &t : trajs) {
    const auto path = dir / (t.taxi_id + ".txt");
    std::ofstream os(path);
    if (!os)
      throw Error(ErrorKind::IoError, "cannot write " + path.string());
    for (const auto &p : t.points)
      os << format_record(p, tz) << '\n';
  }
}

} // namespace ma2gcn
