#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ma2gcn {

/// Geographic bounding box in degrees; bounds are inclusive.
struct BBox {
  double lon_min = 0.0;
  double lat_min = 0.0;
  double lon_max = 0.0;
  double lat_max = 0.0;

  bool valid() const { return lon_min < lon_max && lat_min < lat_max; }
  bool contains(double lon, double lat) const {
    return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
  }
  /// Parses "LON1,LAT1,LON2,LAT2".
  static BBox parse(std::string_view text);

  friend bool operator==(const BBox &, const BBox &) = default;
};

/// Converts between the source's local wall-clock text and epoch seconds.
/// Accepts "UTC", a fixed offset such as "+08:00", or an IANA zone name
/// resolved through the system zoneinfo database.
class TimeZone {
public:
  TimeZone() = default;
  static TimeZone parse(std::string_view spec);

  const std::string &name() const { return name_; }

  /// "YYYY-MM-DD HH:MM:SS" (or with a 'T' separator) in this zone.
  std::int64_t to_epoch(std::string_view local_text) const;
  std::string to_local_text(std::int64_t epoch_seconds) const;

private:
  std::string name_ = "UTC";
  bool fixed_ = true;
  std::int64_t offset_seconds_ = 0;
};

struct GpsPoint {
  std::string taxi_id;
  std::int64_t timestamp = 0; // epoch seconds, UTC
  double longitude = 0.0;
  double latitude = 0.0;
  double speed = 0.0;   // km/h
  double heading = 0.0; // degrees clockwise from north, [0, 360)
  int status = 0;       // carried through, unused downstream

  friend bool operator==(const GpsPoint &, const GpsPoint &) = default;
};

struct Trajectory {
  std::string taxi_id;
  std::vector<GpsPoint> points;

  friend bool operator==(const Trajectory &, const Trajectory &) = default;
};

enum class Delimiter { Auto, Comma, Whitespace };

/// Parses one 7-field record: taxi id, timestamp, lon, lat, speed, angle,
/// status. Whitespace-separated records may carry the timestamp as two
/// tokens ("date time"). The timestamp is local text in `tz` or, when it is
/// all digits, epoch seconds.
/// Throws Error(MalformedRecord) or Error(OutOfRangeField).
GpsPoint parse_record(std::string_view line, const TimeZone &tz,
                      Delimiter delimiter = Delimiter::Auto);

/// Comma-separated record that parse_record reads back field-for-field.
std::string format_record(const GpsPoint &p, const TimeZone &tz);

struct FileIngestReport {
  std::string file;
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::size_t out_of_range = 0;
  std::size_t foreign_id = 0; // well-formed but a different taxi id than the file's first record

  std::size_t skipped() const { return malformed + out_of_range + foreign_id; }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::vector<FileIngestReport> files;

  std::size_t total_lines() const;
  std::size_t total_points() const;
  std::size_t total_skipped() const;
};

/// One trajectory per regular file in `dir` (files visited in name order).
/// The delimiter is detected per file from its first valid line. Blank lines
/// count as malformed records. Throws EmptyDataset when no file yields a
/// point, IoError when `dir` is not a directory.
Dataset load_dataset(const std::filesystem::path &dir, const TimeZone &tz);

/// Stable sort by time, keep the first point of each duplicate timestamp,
/// then drop points outside `bbox`.
Trajectory clean_trajectory(const Trajectory &t, const BBox &bbox);

// Binary trajectory container:
//   "MA2TRAJ\0" | u32 version=1 | u64 n_traj
//   per trajectory: u32 id_len | id bytes | u64 n_points
//   per point: i64 epoch_seconds | f64 lon | f64 lat | f64 speed | f64 heading | i32 status
// All integers and doubles little-endian (host order on supported targets).
void write_trajectory_file(const std::filesystem::path &path, const std::vector<Trajectory> &trajs);
std::vector<Trajectory> read_trajectory_file(const std::filesystem::path &path);

} // namespace ma2gcn
