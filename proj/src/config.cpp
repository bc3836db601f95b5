#include "ma2gcn/config.hpp"

#include "ma2gcn/error.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace ma2gcn {

namespace {

[[noreturn]] void config_error(const std::string &msg) { throw Error(ErrorKind::ConfigError, msg); }

// Reads members of one JSON object and rejects keys nobody asked for.
class ObjectReader {
public:
  ObjectReader(const Json &j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object())
      config_error(where_ + ": expected an object");
  }

  template <class T> void get(const char *key, T &out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end())
      return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean())
          throw std::invalid_argument("not a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned())
          throw std::invalid_argument("not a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer())
          throw std::invalid_argument("not an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number())
          throw std::invalid_argument("not a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string())
          throw std::invalid_argument("not a string");
      }
      if constexpr (std::is_arithmetic_v<T> || std::is_same_v<T, std::string>)
        out = it->template get<T>();
      else
        from_json(*it, out);
    } catch (const Error &) {
      throw;
    } catch (const std::exception &e) {
      config_error(where_ + "." + key + ": " + e.what());
    }
  }

  const Json *raw(const char *key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        config_error(where_ + ": unknown key '" + it.key() + "'");
  }

private:
  const Json &j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::vector<double> number_array(const Json &j, const std::string &where, std::size_t expected) {
  if (!j.is_array() || j.size() != expected)
    config_error(where + ": expected an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  for (const auto &v : j) {
    if (!v.is_number())
      config_error(where + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

Json metrics_json(const ErrorMetrics &m) {
  return Json{{"MAE", m.mae}, {"MAPE", m.mape}, {"RMSE", m.rmse}, {"count", m.count}, {"mape_count", m.mape_count}};
}

} // namespace

Json to_json(const GridSpec &g) {
  return Json{{"bbox", {g.bbox.lon_min, g.bbox.lat_min, g.bbox.lon_max, g.bbox.lat_max}},
              {"M", g.M},
              {"interval_seconds", g.interval_seconds}};
}

void from_json(const Json &j, GridSpec &g) {
  ObjectReader r(j, "grid");
  if (const Json *b = r.raw("bbox")) {
    auto v = number_array(*b, "grid.bbox", 4);
    g.bbox = {v[0], v[1], v[2], v[3]};
  }
  r.get("M", g.M);
  r.get("interval_seconds", g.interval_seconds);
  r.finish();
}

Json to_json(const MobilityParams &m) { return Json{{"kappa", m.kappa}, {"segment_seconds", m.segment_seconds}}; }

void from_json(const Json &j, MobilityParams &m) {
  ObjectReader r(j, "mobility");
  r.get("kappa", m.kappa);
  r.get("segment_seconds", m.segment_seconds);
  r.finish();
}

Json to_json(const ModelConfig &m) {
  return Json{{"N", m.N},
              {"P", m.P},
              {"Q", m.Q},
              {"D", m.D},
              {"K", m.K},
              {"hidden", m.hidden},
              {"attn_hidden", m.attn_hidden},
              {"blocks", m.blocks},
              {"channels", m.channels},
              {"kernel", m.kernel},
              {"use_attention", m.use_attention},
              {"use_dynamic", m.use_dynamic}};
}

void from_json(const Json &j, ModelConfig &m) {
  ObjectReader r(j, "model");
  r.get("N", m.N);
  r.get("P", m.P);
  r.get("Q", m.Q);
  r.get("D", m.D);
  r.get("K", m.K);
  r.get("hidden", m.hidden);
  r.get("attn_hidden", m.attn_hidden);
  r.get("blocks", m.blocks);
  r.get("channels", m.channels);
  r.get("kernel", m.kernel);
  r.get("use_attention", m.use_attention);
  r.get("use_dynamic", m.use_dynamic);
  r.finish();
}

Json to_json(const TrainConfig &t) {
  return Json{{"lr", t.lr},           {"weight_decay", t.weight_decay}, {"batch", t.batch},
              {"epochs", t.epochs},   {"seed", t.seed},                 {"beta1", t.beta1},
              {"beta2", t.beta2},     {"adam_eps", t.adam_eps},         {"clip_norm", t.clip_norm}};
}

void from_json(const Json &j, TrainConfig &t) {
  ObjectReader r(j, "train");
  r.get("lr", t.lr);
  r.get("weight_decay", t.weight_decay);
  r.get("batch", t.batch);
  r.get("epochs", t.epochs);
  r.get("seed", t.seed);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("adam_eps", t.adam_eps);
  r.get("clip_norm", t.clip_norm);
  r.finish();
}

Json to_json(const LossConfig &l) { return Json{{"theta", l.theta}}; }

void from_json(const Json &j, LossConfig &l) {
  ObjectReader r(j, "loss");
  r.get("theta", l.theta);
  r.finish();
}

Json to_json(const SplitRatios &s) { return Json{{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

void from_json(const Json &j, SplitRatios &s) {
  ObjectReader r(j, "split");
  r.get("train", s.train);
  r.get("val", s.val);
  r.get("test", s.test);
  r.finish();
}

Json to_json(const SynthConfig &s) {
  Json rush = Json::array();
  for (const auto &w : s.rush_hours)
    rush.push_back(Json{{"start_hour", w.start_hour}, {"end_hour", w.end_hour}, {"cells", w.cells},
                        {"slowdown", w.slowdown}});
  return Json{{"seed", s.seed},
              {"taxis", s.taxis},
              {"hours", s.hours},
              {"grid", to_json(s.grid)},
              {"rush_hours", rush},
              {"sample_period_seconds", s.sample_period_seconds},
              {"start_epoch", s.start_epoch},
              {"utc_offset_seconds", s.utc_offset_seconds},
              {"cruise_min_kmh", s.cruise_min_kmh},
              {"cruise_max_kmh", s.cruise_max_kmh},
              {"cell_factor_min", s.cell_factor_min},
              {"cell_factor_max", s.cell_factor_max},
              {"dwell_probability", s.dwell_probability},
              {"dwell_max_seconds", s.dwell_max_seconds},
              {"speed_noise_kmh", s.speed_noise_kmh}};
}

void from_json(const Json &j, SynthConfig &s) {
  ObjectReader r(j, "synth");
  r.get("seed", s.seed);
  r.get("taxis", s.taxis);
  r.get("hours", s.hours);
  r.get("grid", s.grid);
  if (const Json *rush = r.raw("rush_hours")) {
    if (!rush->is_array())
      config_error("synth.rush_hours: expected an array");
    s.rush_hours.clear();
    for (const auto &w : *rush) {
      ObjectReader wr(w, "synth.rush_hours[]");
      RushWindow win;
      wr.get("start_hour", win.start_hour);
      wr.get("end_hour", win.end_hour);
      wr.get("slowdown", win.slowdown);
      if (const Json *cells = wr.raw("cells")) {
        if (!cells->is_array())
          config_error("synth.rush_hours[].cells: expected an array");
        for (const auto &c : *cells) {
          if (!c.is_number_unsigned())
            config_error("synth.rush_hours[].cells: expected cell indices");
          win.cells.push_back(c.get<std::size_t>());
        }
      }
      wr.finish();
      s.rush_hours.push_back(std::move(win));
    }
  }
  r.get("sample_period_seconds", s.sample_period_seconds);
  r.get("start_epoch", s.start_epoch);
  r.get("utc_offset_seconds", s.utc_offset_seconds);
  r.get("cruise_min_kmh", s.cruise_min_kmh);
  r.get("cruise_max_kmh", s.cruise_max_kmh);
  r.get("cell_factor_min", s.cell_factor_min);
  r.get("cell_factor_max", s.cell_factor_max);
  r.get("dwell_probability", s.dwell_probability);
  r.get("dwell_max_seconds", s.dwell_max_seconds);
  r.get("speed_noise_kmh", s.speed_noise_kmh);
  r.finish();
}

Json to_json(const FeatureStats &s) {
  return Json{{"mean", s.mean},
              {"stddev", s.stddev},
              {"degenerate", s.degenerate},
              {"cell_speed_mean", s.cell_speed_mean},
              {"global_speed_mean", s.global_speed_mean},
              {"fit_intervals", s.fit_intervals}};
}

void from_json(const Json &j, FeatureStats &s) {
  try {
    s.mean = j.at("mean").get<std::array<double, 2>>();
    s.stddev = j.at("stddev").get<std::array<double, 2>>();
    s.degenerate = j.at("degenerate").get<std::array<bool, 2>>();
    s.cell_speed_mean = j.at("cell_speed_mean").get<std::vector<double>>();
    s.global_speed_mean = j.at("global_speed_mean").get<double>();
    s.fit_intervals = j.at("fit_intervals").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    config_error(std::string("stats: ") + e.what());
  }
}

Json to_json(const ForecastMetrics &m) {
  return Json{{"speed", metrics_json(m.speed)}, {"flow", metrics_json(m.flow)}, {"combined", metrics_json(m.combined)}};
}

Json to_json(const RunConfig &c) {
  return Json{{"schema_version", kConfigSchemaVersion},
              {"grid", to_json(c.grid)},
              {"timezone", c.timezone},
              {"mobility", {{"kappa", c.mobility.kappa},
                            {"segment_seconds", c.mobility.segment_seconds},
                            {"segment", c.mobility_segment}}},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"loss", to_json(c.loss)},
              {"split", to_json(c.split)},
              {"synth", to_json(c.synth)},
              {"paths", {{"raw_dir", c.paths.raw_dir},
                         {"trajectories", c.paths.trajectories},
                         {"graph_dir", c.paths.graph_dir},
                         {"run_dir", c.paths.run_dir}}}};
}

void from_json(const Json &j, RunConfig &c) {
  ObjectReader r(j, "config");
  int version = kConfigSchemaVersion;
  r.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    config_error("unsupported schema_version " + std::to_string(version));
  r.get("grid", c.grid);
  r.get("timezone", c.timezone);
  if (const Json *m = r.raw("mobility")) {
    ObjectReader mr(*m, "mobility");
    mr.get("kappa", c.mobility.kappa);
    mr.get("segment_seconds", c.mobility.segment_seconds);
    mr.get("segment", c.mobility_segment);
    mr.finish();
  }
  r.get("model", c.model);
  r.get("train", c.train);
  r.get("loss", c.loss);
  r.get("split", c.split);
  r.get("synth", c.synth);
  if (const Json *p = r.raw("paths")) {
    ObjectReader pr(*p, "paths");
    pr.get("raw_dir", c.paths.raw_dir);
    pr.get("trajectories", c.paths.trajectories);
    pr.get("graph_dir", c.paths.graph_dir);
    pr.get("run_dir", c.paths.run_dir);
    pr.finish();
  }
  r.finish();
}

RunConfig RunConfig::synthetic_defaults() {
  RunConfig c;
  c.synth = SynthConfig::defaults();
  c.grid = c.synth.grid;
  c.timezone = "+08:00";
  c.model.N = c.grid.N();
  c.model.hidden = 16;
  c.model.attn_hidden = 16;
  c.model.channels = 16;
  c.train.epochs = 30;
  return c;
}

void RunConfig::validate() const {
  try {
    grid.validate();
    mobility.validate();
    model.validate();
    train.validate();
    loss.validate();
    synth.validate();
    TimeZone::parse(timezone);
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::ConfigError)
      throw;
    config_error(e.what());
  }
  if (split.train == 0 || split.val == 0 || split.test == 0)
    config_error("split ratios must be positive");
}

RunConfig parse_run_config(const Json &j) {
  RunConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

Json read_json_file(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path &path) {
  if (!std::filesystem::is_regular_file(path))
    config_error("config file not found: " + path.string());
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error &e) {
    config_error(e.what());
  }
  return parse_run_config(j);
}

void write_json_file(const std::filesystem::path &path, const Json &j) {
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  if (ec)
    throw Error(ErrorKind::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path);
  if (!os)
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

std::string bytes_digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_digest(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return bytes_digest(bytes);
}

} // namespace ma2gcn
