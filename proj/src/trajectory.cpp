#include "ma2gcn/trajectory.hpp"

#include "binary_io.hpp"
#include "ma2gcn/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <optional>

namespace ma2gcn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v))
      return std::nullopt;
  return v;
}

std::vector<std::string_view> split_comma(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    if (i > start)
      out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

[[noreturn]] void malformed(const std::string &why) { throw Error(ErrorKind::MalformedRecord, why); }

struct CivilTime {
  int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
};

CivilTime parse_civil(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DD[ T]HH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') ||
      text[13] != ':' || text[16] != ':')
    malformed("unrecognized timestamp '" + std::string(text) + "'");
  auto field = [&](std::size_t pos, std::size_t len) {
    auto v = all_digits(text.substr(pos, len)) ? parse_number<int>(text.substr(pos, len)) : std::nullopt;
    if (!v)
      malformed("unrecognized timestamp '" + std::string(text) + "'");
    return *v;
  };
  CivilTime c{field(0, 4), field(5, 2), field(8, 2), field(11, 2), field(14, 2), field(17, 2)};
  using namespace std::chrono;
  const year_month_day ymd{year{c.year}, month{static_cast<unsigned>(c.month)},
                           day{static_cast<unsigned>(c.day)}};
  if (!ymd.ok() || c.hour > 23 || c.minute > 59 || c.second > 59)
    malformed("invalid calendar time '" + std::string(text) + "'");
  return c;
}

std::int64_t civil_as_utc(const CivilTime &c) {
  using namespace std::chrono;
  const sys_days days{year{c.year} / month{static_cast<unsigned>(c.month)} /
                      day{static_cast<unsigned>(c.day)}};
  return days.time_since_epoch().count() * 86400LL + c.hour * 3600LL + c.minute * 60LL + c.second;
}

std::string format_civil(const CivilTime &c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", c.year, c.month, c.day, c.hour,
                c.minute, c.second);
  return buf;
}

CivilTime utc_civil(std::int64_t epoch) {
  using namespace std::chrono;
  const std::int64_t days = (epoch >= 0 ? epoch : epoch - 86399) / 86400;
  const std::int64_t rem = epoch - days * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day())), static_cast<int>(rem / 3600),
          static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60)};
}

// The C library's zone conversion reads the process-wide TZ variable.
std::mutex &tz_mutex() {
  static std::mutex m;
  return m;
}

class ScopedTz {
public:
  explicit ScopedTz(const std::string &zone) {
    if (const char *old = std::getenv("TZ"))
      previous_ = old;
    ::setenv("TZ", zone.c_str(), 1);
    ::tzset();
  }
  ~ScopedTz() {
    if (previous_)
      ::setenv("TZ", previous_->c_str(), 1);
    else
      ::unsetenv("TZ");
    ::tzset();
  }
  ScopedTz(const ScopedTz &) = delete;
  ScopedTz &operator=(const ScopedTz &) = delete;

private:
  std::optional<std::string> previous_;
};

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace

// ---- BBox ------------------------------------------------------------------

BBox BBox::parse(std::string_view text) {
  auto parts = split_comma(text);
  if (parts.size() != 4)
    throw Error(ErrorKind::ConfigError, "bbox needs LON1,LAT1,LON2,LAT2, got '" + std::string(text) + "'");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    auto x = parse_number<double>(parts[i]);
    if (!x)
      throw Error(ErrorKind::ConfigError, "bad bbox number '" + std::string(parts[i]) + "'");
    v[i] = *x;
  }
  BBox b{std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]), std::max(v[1], v[3])};
  if (!b.valid())
    throw Error(ErrorKind::ConfigError, "degenerate bbox '" + std::string(text) + "'");
  return b;
}

// ---- TimeZone ----------------------------------------------------------------

TimeZone TimeZone::parse(std::string_view spec) {
  TimeZone tz;
  spec = trim(spec);
  tz.name_ = std::string(spec);
  if (spec == "UTC" || spec == "Z" || spec.empty()) {
    tz.name_ = "UTC";
    return tz;
  }
  if ((spec.front() == '+' || spec.front() == '-') && spec.size() == 6 && spec[3] == ':') {
    auto h = parse_number<int>(spec.substr(1, 2));
    auto m = parse_number<int>(spec.substr(4, 2));
    if (!h || !m || *h > 14 || *m > 59)
      throw Error(ErrorKind::ConfigError, "bad UTC offset '" + tz.name_ + "'");
    tz.offset_seconds_ = (spec.front() == '-' ? -1 : 1) * (*h * 3600 + *m * 60);
    return tz;
  }
  const std::filesystem::path zoneinfo = std::filesystem::path("/usr/share/zoneinfo") / tz.name_;
  if (tz.name_.find("..") != std::string::npos || !std::filesystem::is_regular_file(zoneinfo))
    throw Error(ErrorKind::ConfigError, "unknown time zone '" + tz.name_ + "'");
  tz.fixed_ = false;
  return tz;
}

std::int64_t TimeZone::to_epoch(std::string_view local_text) const {
  const CivilTime c = parse_civil(local_text);
  if (fixed_)
    return civil_as_utc(c) - offset_seconds_;
  std::lock_guard lock(tz_mutex());
  ScopedTz scope(name_);
  std::tm tm{};
  tm.tm_year = c.year - 1900;
  tm.tm_mon = c.month - 1;
  tm.tm_mday = c.day;
  tm.tm_hour = c.hour;
  tm.tm_min = c.minute;
  tm.tm_sec = c.second;
  tm.tm_isdst = -1;
  return static_cast<std::int64_t>(std::mktime(&tm));
}

std::string TimeZone::to_local_text(std::int64_t epoch_seconds) const {
  if (fixed_)
    return format_civil(utc_civil(epoch_seconds + offset_seconds_));
  std::lock_guard lock(tz_mutex());
  ScopedTz scope(name_);
  const std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  ::localtime_r(&t, &tm);
  return format_civil({tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec});
}

// ---- records -----------------------------------------------------------------

GpsPoint parse_record(std::string_view line, const TimeZone &tz, Delimiter delimiter) {
  line = trim(line);
  if (line.empty())
    malformed("empty line");
  if (delimiter == Delimiter::Auto)
    delimiter = line.find(',') != std::string_view::npos ? Delimiter::Comma : Delimiter::Whitespace;

  std::vector<std::string_view> f =
      delimiter == Delimiter::Comma ? split_comma(line) : split_ws(line);
  std::string joined_time;
  if (delimiter == Delimiter::Whitespace && f.size() == 8) {
    // "date time" arrives as two tokens
    joined_time = std::string(f[1]) + " " + std::string(f[2]);
    f.erase(f.begin() + 2);
    f[1] = joined_time;
  }
  if (f.size() != 7)
    malformed("expected 7 fields, got " + std::to_string(f.size()));

  GpsPoint p;
  p.taxi_id = std::string(f[0]);
  if (p.taxi_id.empty())
    malformed("empty taxi id");
  if (all_digits(f[1])) {
    auto epoch = parse_number<std::int64_t>(f[1]);
    if (!epoch)
      malformed("bad epoch timestamp");
    p.timestamp = *epoch;
  } else {
    p.timestamp = tz.to_epoch(f[1]);
  }
  auto num = [&](std::size_t i, const char *what) {
    auto v = parse_number<double>(f[i]);
    if (!v)
      malformed(std::string("unparseable ") + what + " '" + std::string(f[i]) + "'");
    return *v;
  };
  p.longitude = num(2, "longitude");
  p.latitude = num(3, "latitude");
  p.speed = num(4, "speed");
  p.heading = num(5, "heading");
  auto status = parse_number<int>(f[6]);
  if (!status)
    malformed("unparseable status '" + std::string(f[6]) + "'");
  p.status = *status;

  if (p.longitude < -180.0 || p.longitude > 180.0)
    throw Error(ErrorKind::OutOfRangeField, "longitude " + format_double(p.longitude));
  if (p.latitude < -90.0 || p.latitude > 90.0)
    throw Error(ErrorKind::OutOfRangeField, "latitude " + format_double(p.latitude));
  if (p.speed < 0.0)
    throw Error(ErrorKind::OutOfRangeField, "speed " + format_double(p.speed));
  if (p.heading < 0.0 || p.heading >= 360.0)
    throw Error(ErrorKind::OutOfRangeField, "heading " + format_double(p.heading));
  return p;
}

std::string format_record(const GpsPoint &p, const TimeZone &tz) {
  std::string s;
  s.reserve(96);
  s += p.taxi_id;
  s += ',';
  s += tz.to_local_text(p.timestamp);
  for (double v : {p.longitude, p.latitude, p.speed, p.heading}) {
    s += ',';
    s += format_double(v);
  }
  s += ',';
  s += std::to_string(p.status);
  return s;
}

// ---- dataset -------------------------------------------------------------------

std::size_t Dataset::total_lines() const {
  std::size_t n = 0;
  for (const auto &f : files)
    n += f.lines;
  return n;
}

std::size_t Dataset::total_points() const {
  std::size_t n = 0;
  for (const auto &t : trajectories)
    n += t.points.size();
  return n;
}

std::size_t Dataset::total_skipped() const {
  std::size_t n = 0;
  for (const auto &f : files)
    n += f.skipped();
  return n;
}

Dataset load_dataset(const std::filesystem::path &dir, const TimeZone &tz) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw Error(ErrorKind::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_regular_file())
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  Dataset ds;
  for (const auto &path : files) {
    std::ifstream in(path);
    if (!in)
      continue;
    FileIngestReport report;
    report.file = path.filename().string();
    Trajectory traj;
    Delimiter delim = Delimiter::Auto;
    std::string line;
    while (std::getline(in, line)) {
      ++report.lines;
      try {
        GpsPoint p = parse_record(line, tz, delim);
        if (delim == Delimiter::Auto)
          delim = line.find(',') != std::string::npos ? Delimiter::Comma : Delimiter::Whitespace;
        if (traj.points.empty())
          traj.taxi_id = p.taxi_id;
        else if (p.taxi_id != traj.taxi_id) {
          ++report.foreign_id;
          continue;
        }
        traj.points.push_back(std::move(p));
        ++report.parsed;
      } catch (const Error &e) {
        if (e.kind() == ErrorKind::OutOfRangeField)
          ++report.out_of_range;
        else
          ++report.malformed;
      }
    }
    if (!traj.points.empty())
      ds.trajectories.push_back(std::move(traj));
    ds.files.push_back(std::move(report));
  }
  if (ds.trajectories.empty())
    throw Error(ErrorKind::EmptyDataset, "no readable GPS records under " + dir.string());
  return ds;
}

Trajectory clean_trajectory(const Trajectory &t, const BBox &bbox) {
  Trajectory out{t.taxi_id, t.points};
  std::stable_sort(out.points.begin(), out.points.end(),
                   [](const GpsPoint &a, const GpsPoint &b) { return a.timestamp < b.timestamp; });
  auto dup = std::unique(out.points.begin(), out.points.end(), [](const GpsPoint &a, const GpsPoint &b) {
    return a.timestamp == b.timestamp;
  });
  out.points.erase(dup, out.points.end());
  std::erase_if(out.points, [&](const GpsPoint &p) { return !bbox.contains(p.longitude, p.latitude); });
  return out;
}

// ---- binary container ------------------------------------------------------------

namespace {
constexpr char kTrajMagic[8] = {'M', 'A', '2', 'T', 'R', 'A', 'J', '\0'};
constexpr std::uint32_t kTrajVersion = 1;
} // namespace

void write_trajectory_file(const std::filesystem::path &path, const std::vector<Trajectory> &trajs) {
  auto os = io::open_out(path.string());
  os.write(kTrajMagic, sizeof kTrajMagic);
  io::write_pod(os, kTrajVersion);
  io::write_pod<std::uint64_t>(os, trajs.size());
  for (const auto &t : trajs) {
    io::write_string(os, t.taxi_id);
    io::write_pod<std::uint64_t>(os, t.points.size());
    for (const auto &p : t.points) {
      io::write_pod<std::int64_t>(os, p.timestamp);
      io::write_pod(os, p.longitude);
      io::write_pod(os, p.latitude);
      io::write_pod(os, p.speed);
      io::write_pod(os, p.heading);
      io::write_pod<std::int32_t>(os, p.status);
    }
  }
  if (!os)
    throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

std::vector<Trajectory> read_trajectory_file(const std::filesystem::path &path) {
  auto is = io::open_in(path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kTrajMagic))
    throw Error(ErrorKind::IoError, path.string() + " is not a trajectory file");
  if (io::read_pod<std::uint32_t>(is) != kTrajVersion)
    throw Error(ErrorKind::IoError, path.string() + ": unsupported trajectory file version");
  const auto n = io::read_pod<std::uint64_t>(is);
  std::vector<Trajectory> trajs(n);
  for (auto &t : trajs) {
    t.taxi_id = io::read_string(is);
    t.points.resize(io::read_pod<std::uint64_t>(is));
    for (auto &p : t.points) {
      p.taxi_id = t.taxi_id;
      p.timestamp = io::read_pod<std::int64_t>(is);
      p.longitude = io::read_pod<double>(is);
      p.latitude = io::read_pod<double>(is);
      p.speed = io::read_pod<double>(is);
      p.heading = io::read_pod<double>(is);
      p.status = io::read_pod<std::int32_t>(is);
    }
  }
  return trajs;
}

} // namespace ma2gcn
