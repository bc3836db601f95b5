#include "ma2gcn/pipeline.hpp"

#include "binary_io.hpp"
#include "ma2gcn/error.hpp"
#include "ma2gcn/synthetic.hpp"
#include "ma2gcn/trajectory.hpp"
#include "ma2gcn/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ma2gcn {

namespace {

constexpr char kFeatureMagic[8] = {'M', 'A', '2', 'F', 'E', 'A', 'T', '\0'};
constexpr char kEntryExitMagic[8] = {'M', 'A', '2', 'E', 'N', 'E', 'X', '\0'};
constexpr std::uint32_t kBinaryVersion = 1;

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void check_magic(std::istream &is, const char (&magic)[8], const fs::path &path) {
  char got[8];
  if (!is.read(got, sizeof got) || std::memcmp(got, magic, sizeof got) != 0)
    throw Error(ErrorKind::IoError, path.string() + ": wrong file type");
  if (io::read_pod<std::uint32_t>(is) != kBinaryVersion)
    throw Error(ErrorKind::IoError, path.string() + ": unsupported version");
}

void expect_eof(std::istream &is, const fs::path &path) {
  if (is.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::IoError, path.string() + ": trailing bytes");
}

std::string model_label(const ModelConfig &m) {
  if (m.use_attention && m.use_dynamic)
    return "MA2GCN";
  if (!m.use_attention && !m.use_dynamic)
    return "MA2GCN w/o both";
  return m.use_attention ? "MA2GCN w/o dy" : "MA2GCN w/o att";
}

Json baseline_json(const ForecastData &data) {
  const auto truth = denormalize_values(concat_targets(data.split.test), data.stats);
  Json out;
  for (auto [kind, name] : {std::pair{BaselineKind::LastValue, "last_value"},
                            std::pair{BaselineKind::HistoricalAverage, "historical_average"}}) {
    const auto pred = denormalize_values(baseline_predict(kind, data, data.split.test), data.stats);
    out[name] = to_json(metrics(pred, truth));
  }
  return out;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text))
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  return out;
}

} // namespace

// ---- binary artifacts -------------------------------------------------------

void write_feature_file(const fs::path &path, const FeatureTensor &x) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  auto os = io::open_out(path.string());
  os.write(kFeatureMagic, sizeof kFeatureMagic);
  io::write_pod(os, kBinaryVersion);
  io::write_pod<std::uint64_t>(os, x.T);
  io::write_pod<std::uint64_t>(os, x.N);
  io::write_pod<std::uint64_t>(os, x.D);
  io::write_pod<std::int64_t>(os, x.start_time);
  io::write_pod<std::int64_t>(os, x.interval_seconds);
  io::write_doubles(os, x.values);
  os.write(reinterpret_cast<const char *>(x.mask.data()), static_cast<std::streamsize>(x.mask.size()));
  if (!os)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

FeatureTensor read_feature_file(const fs::path &path) {
  auto is = io::open_in(path.string());
  check_magic(is, kFeatureMagic, path);
  FeatureTensor x;
  x.T = io::read_pod<std::uint64_t>(is);
  x.N = io::read_pod<std::uint64_t>(is);
  x.D = io::read_pod<std::uint64_t>(is);
  x.start_time = io::read_pod<std::int64_t>(is);
  x.interval_seconds = io::read_pod<std::int64_t>(is);
  if (x.D != 2 || x.N == 0 || x.T > (std::size_t{1} << 32) || x.N > (std::size_t{1} << 20))
    throw Error(ErrorKind::IoError, path.string() + ": implausible feature dimensions");
  x.values = io::read_doubles(is, x.T * x.N * x.D);
  x.mask.resize(x.T * x.N);
  if (!is.read(reinterpret_cast<char *>(x.mask.data()), static_cast<std::streamsize>(x.mask.size())))
    throw Error(ErrorKind::IoError, path.string() + ": truncated");
  expect_eof(is, path);
  return x;
}

void write_entry_exit_file(const fs::path &path, const EntryExitMatrix &e) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  auto os = io::open_out(path.string());
  os.write(kEntryExitMagic, sizeof kEntryExitMagic);
  io::write_pod(os, kBinaryVersion);
  io::write_pod<std::uint64_t>(os, e.S);
  io::write_pod<std::uint64_t>(os, e.N);
  io::write_pod<std::int64_t>(os, e.segment_seconds);
  io::write_pod<std::int64_t>(os, e.start_time);
  os.write(reinterpret_cast<const char *>(e.counts.data()),
           static_cast<std::streamsize>(e.counts.size() * sizeof(std::uint64_t)));
  io::write_doubles(os, e.mean_travel_time);
  if (!os)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

EntryExitMatrix read_entry_exit_file(const fs::path &path) {
  auto is = io::open_in(path.string());
  check_magic(is, kEntryExitMagic, path);
  EntryExitMatrix e;
  e.S = io::read_pod<std::uint64_t>(is);
  e.N = io::read_pod<std::uint64_t>(is);
  e.segment_seconds = io::read_pod<std::int64_t>(is);
  e.start_time = io::read_pod<std::int64_t>(is);
  if (e.N == 0 || e.N > (std::size_t{1} << 16) || e.S > (std::size_t{1} << 24))
    throw Error(ErrorKind::IoError, path.string() + ": implausible dimensions");
  e.counts.resize(e.S * e.N * e.N);
  if (!is.read(reinterpret_cast<char *>(e.counts.data()),
               static_cast<std::streamsize>(e.counts.size() * sizeof(std::uint64_t))))
    throw Error(ErrorKind::IoError, path.string() + ": truncated");
  e.mean_travel_time = io::read_doubles(is, e.S * e.N * e.N);
  expect_eof(is, path);
  return e;
}

void write_matrix_csv(const fs::path &path, const Matrix &m) {
  std::string text;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j)
        text += ',';
      text += fmt(m(i, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

Matrix read_matrix_csv(const fs::path &path) {
  std::ifstream is(path);
  if (!is)
    throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::vector<double> row;
    for (const auto &cell : split_csv_line(line)) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw Error(ErrorKind::IoError, path.string() + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n)
      throw Error(ErrorKind::IoError, path.string() + ": matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = rows[i][j];
  }
  return m;
}

GraphData load_graph_dir(const fs::path &dir) {
  const Json manifest = read_json_file(dir / "graph.json");
  GraphData g;
  try {
    from_json(manifest.at("grid"), g.grid);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::IoError, (dir / "graph.json").string() + ": " + e.what());
  }
  g.features = read_feature_file(dir / "features.bin");
  g.initial = read_matrix_csv(dir / "adjacency_initial.csv");
  g.squared = read_matrix_csv(dir / "adjacency_squared.csv");
  g.mobility = read_matrix_csv(dir / "adjacency_mobility.csv");
  const auto n = static_cast<Eigen::Index>(g.features.N);
  for (const Matrix *m : {&g.initial, &g.squared, &g.mobility})
    if (m->rows() != n)
      throw Error(ErrorKind::ValidationError, dir.string() + ": adjacency size disagrees with features");
  g.features_digest = file_digest(dir / "features.bin");
  g.graph_digest = bytes_digest(file_digest(dir / "adjacency_initial.csv") + file_digest(dir / "adjacency_squared.csv") +
                                file_digest(dir / "adjacency_mobility.csv"));
  return g;
}

// ---- subcommands ------------------------------------------------------------

Json run_synth(const SynthConfig &cfg, const std::string &timezone, const fs::path &out_dir) {
  const auto tz = TimeZone::parse(timezone);
  const auto trajs = generate(cfg);
  write_trajectory_text(out_dir, trajs, tz);
  std::size_t points = 0;
  std::string digests;
  for (const auto &t : trajs) {
    points += t.points.size();
    digests += file_digest(out_dir / (t.taxi_id + ".txt"));
  }
  Json manifest{{"schema_version", kArtifactSchemaVersion},
                {"command", "synth"},
                {"config", to_json(cfg)},
                {"timezone", timezone},
                {"files", trajs.size()},
                {"points", points},
                {"output_digest", bytes_digest(digests)}};
  auto where = out_dir;
  if (!where.has_filename())
    where = where.parent_path();
  write_json_file(where.string() + ".json", manifest);
  return manifest;
}

Json run_ingest(const fs::path &input_dir, const BBox &bbox, const std::string &timezone, const fs::path &out) {
  if (!bbox.valid())
    throw Error(ErrorKind::ConfigError, "invalid bbox");
  const auto tz = TimeZone::parse(timezone);
  const Dataset ds = load_dataset(input_dir, tz);

  std::vector<Trajectory> cleaned;
  std::size_t dropped = 0;
  for (const auto &t : ds.trajectories) {
    auto c = clean_trajectory(t, bbox);
    dropped += t.points.size() - c.points.size();
    if (!c.points.empty())
      cleaned.push_back(std::move(c));
  }
  write_trajectory_file(out, cleaned);

  Json files = Json::array();
  std::string digests;
  for (const auto &f : ds.files) {
    files.push_back(Json{{"file", f.file},
                         {"lines", f.lines},
                         {"parsed", f.parsed},
                         {"malformed", f.malformed},
                         {"out_of_range", f.out_of_range},
                         {"foreign_id", f.foreign_id},
                         {"skipped", f.skipped()}});
    digests += f.file + ":" + file_digest(input_dir / f.file) + ";";
  }
  std::size_t kept = 0;
  for (const auto &t : cleaned)
    kept += t.points.size();
  Json report{{"schema_version", kArtifactSchemaVersion},
              {"command", "ingest"},
              {"files", ds.files.size()},
              {"records", ds.total_points()},
              {"skipped", ds.total_skipped()},
              {"bbox", {bbox.lon_min, bbox.lat_min, bbox.lon_max, bbox.lat_max}},
              {"timezone", timezone},
              {"removed_by_cleaning", dropped},
              {"trajectories", cleaned.size()},
              {"points_written", kept},
              {"file_reports", files},
              {"input_digest", bytes_digest(digests)},
              {"output_digest", file_digest(out)}};
  write_json_file(out.string() + ".json", report);
  return report;
}

Json run_build_graph(const fs::path &traj_file, const RunConfig &cfg, const fs::path &out_dir) {
  cfg.grid.validate();
  cfg.mobility.validate();
  std::vector<Trajectory> trajs;
  std::size_t outside = 0;
  for (const auto &t : read_trajectory_file(traj_file)) {
    auto c = clean_trajectory(t, cfg.grid.bbox);
    outside += t.points.size() - c.points.size();
    if (!c.points.empty())
      trajs.push_back(std::move(c));
  }
  if (trajs.empty())
    throw Error(ErrorKind::EmptyDataset, "no trajectory points inside the grid bbox");

  const FeatureTensor x = aggregate_features(trajs, cfg.grid);
  const auto a = build_initial_adjacency(cfg.grid);
  const auto a2 = square_adjacency(a);
  std::vector<std::vector<GridEntryEvent>> events;
  events.reserve(trajs.size());
  for (const auto &t : trajs)
    events.push_back(detect_grid_entries(t, cfg.grid));
  const TimeRange horizon{x.start_time, x.start_time + static_cast<std::int64_t>(x.T) * x.interval_seconds};
  const auto e = build_entry_exit_matrix(events, cfg.grid.N(), cfg.mobility, horizon);
  if (cfg.mobility_segment >= e.S)
    throw Error(ErrorKind::ConfigError, "mobility segment " + std::to_string(cfg.mobility_segment) +
                                            " out of range (S=" + std::to_string(e.S) + ")");
  const auto amo = build_mobility_adjacency(e, cfg.mobility_segment, cfg.mobility);

  fs::create_directories(out_dir);
  write_feature_file(out_dir / "features.bin", x);
  write_matrix_csv(out_dir / "adjacency_initial.csv", a.values);
  write_matrix_csv(out_dir / "adjacency_squared.csv", a2.values);
  write_matrix_csv(out_dir / "adjacency_mobility.csv", amo.values);
  write_entry_exit_file(out_dir / "entry_exit.bin", e);

  std::size_t observed = 0;
  for (auto m : x.mask)
    observed += m;
  Json stats = nullptr;
  try {
    const auto d = prepare_forecast_data(x, {}, cfg.model.P, cfg.model.Q, cfg.split);
    stats = to_json(d.stats);
  } catch (const Error &err) {
    if (err.kind() != ErrorKind::TooShort && err.kind() != ErrorKind::TooFew)
      throw;
  }
  write_json_file(out_dir / "features.json",
                  Json{{"schema_version", kArtifactSchemaVersion},
                       {"M", cfg.grid.M},
                       {"N", x.N},
                       {"T", x.T},
                       {"D", x.D},
                       {"interval_seconds", x.interval_seconds},
                       {"start_time", x.start_time},
                       {"bbox", to_json(cfg.grid)["bbox"]},
                       {"observed_fraction", x.mask.empty() ? 0.0 : double(observed) / double(x.mask.size())},
                       {"stats", stats},
                       {"stats_window", {{"P", cfg.model.P}, {"Q", cfg.model.Q}, {"split", to_json(cfg.split)}}}});
  write_json_file(out_dir / "entry_exit.json", Json{{"schema_version", kArtifactSchemaVersion},
                                                    {"S", e.S},
                                                    {"N", e.N},
                                                    {"F", 2},
                                                    {"fields", {"count", "mean_travel_time_seconds"}},
                                                    {"segment_seconds", e.segment_seconds},
                                                    {"start_time", e.start_time}});
  Json manifest{{"schema_version", kArtifactSchemaVersion},
                {"command", "build-graph"},
                {"grid", to_json(cfg.grid)},
                {"N", x.N},
                {"T", x.T},
                {"mobility", {{"kappa", cfg.mobility.kappa},
                              {"segment", cfg.mobility_segment},
                              {"segment_seconds", cfg.mobility.segment_seconds},
                              {"segments", e.S}}},
                {"points_outside_grid", outside},
                {"input_digest", file_digest(traj_file)},
                {"outputs",
                 {{"features.bin", file_digest(out_dir / "features.bin")},
                  {"adjacency_initial.csv", file_digest(out_dir / "adjacency_initial.csv")},
                  {"adjacency_squared.csv", file_digest(out_dir / "adjacency_squared.csv")},
                  {"adjacency_mobility.csv", file_digest(out_dir / "adjacency_mobility.csv")},
                  {"entry_exit.bin", file_digest(out_dir / "entry_exit.bin")}}}};
  write_json_file(out_dir / "graph.json", manifest);
  return manifest;
}

Json run_train(const fs::path &graph_dir, const RunConfig &cfg, const fs::path &out_dir, bool verbose) {
  cfg.validate();
  const GraphData g = load_graph_dir(graph_dir);
  if (cfg.model.N != g.features.N)
    throw Error(ErrorKind::ValidationError, "model N=" + std::to_string(cfg.model.N) + " but the data has N=" +
                                                std::to_string(g.features.N));
  const ForecastData data =
      prepare_forecast_data(g.features, g.static_graphs(), cfg.model.P, cfg.model.Q, cfg.split);

  Ma2gcnModel model(cfg.model, cfg.train.seed);
  const TrainResult result = train(model, data, cfg.train, cfg.loss, verbose);

  Checkpoint ckpt = make_checkpoint(model, data.stats, cfg.loss, cfg.train, &result, g.features_digest);
  ckpt.initial = g.initial;
  ckpt.squared = g.squared;
  ckpt.mobility = g.mobility;
  fs::create_directories(out_dir);
  save_checkpoint(out_dir / "checkpoint.bin", ckpt);

  std::string log = "epoch,train_loss,val_loss,val_MAE,val_MAPE,val_RMSE,seconds\n";
  for (const auto &e : result.log)
    log += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," + fmt(e.val_mae) + "," +
           fmt(e.val_mape) + "," + fmt(e.val_rmse) + "," + fmt(std::round(e.seconds * 1000.0) / 1000.0) + "\n";
  write_text(out_dir / "epoch_log.csv", log);
  write_json_file(out_dir / "config.json", to_json(cfg));

  Json report{{"schema_version", kArtifactSchemaVersion},
              {"command", "train"},
              {"model", model_label(cfg.model)},
              {"seed", cfg.train.seed},
              {"inputs", {{"features", g.features_digest}, {"graphs", g.graph_digest}}},
              {"config_digest", bytes_digest(to_json(cfg).dump())},
              {"samples", {{"train", data.split.train.size()},
                           {"val", data.split.val.size()},
                           {"test", data.split.test.size()}}},
              {"epochs", result.log.size()},
              {"best_epoch", result.best_epoch},
              {"best_val_loss", result.best_val_loss},
              {"final_train_loss", result.log.empty() ? 0.0 : result.log.back().train_loss},
              {"test", to_json(evaluate_metrics(model, data, data.split.test))},
              {"baselines", baseline_json(data)},
              {"checkpoint_digest", file_digest(out_dir / "checkpoint.bin")}};
  write_json_file(out_dir / "report.json", report);
  return report;
}

Json run_evaluate(const fs::path &checkpoint, const fs::path &graph_dir, const SplitRatios &split) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const GraphData g = load_graph_dir(graph_dir);
  if (ckpt.model.N != g.features.N)
    throw Error(ErrorKind::ValidationError, "checkpoint expects N=" + std::to_string(ckpt.model.N) +
                                                " but the data has N=" + std::to_string(g.features.N));
  const ForecastData data =
      prepare_forecast_data(g.features, g.static_graphs(), ckpt.model.P, ckpt.model.Q, split, &ckpt.stats);
  const Ma2gcnModel model = restore_model(ckpt);
  return Json{{"schema_version", kArtifactSchemaVersion},
              {"command", "evaluate"},
              {"model", model_label(ckpt.model)},
              {"inputs", {{"checkpoint", file_digest(checkpoint)}, {"features", g.features_digest},
                          {"graphs", g.graph_digest}}},
              {"test_samples", data.split.test.size()},
              {"test", to_json(evaluate_metrics(model, data, data.split.test))},
              {"baselines", baseline_json(data)}};
}

Json run_predict(const fs::path &checkpoint, const Json &window) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto &mc = ckpt.model;
  auto invalid = [](const std::string &msg) { throw Error(ErrorKind::ValidationError, "window: " + msg); };
  if (!window.is_object() || !window.contains("window"))
    invalid("expected an object with a \"window\" array");
  const Json &w = window.at("window");
  if (!w.is_array() || w.size() != mc.P)
    invalid("expected " + std::to_string(mc.P) + " time steps");

  FeatureTensor x;
  x.T = mc.P;
  x.N = mc.N;
  x.D = mc.D;
  x.values.assign(x.T * x.N * x.D, 0.0);
  x.mask.assign(x.T * x.N, 0);
  for (std::size_t t = 0; t < mc.P; ++t) {
    if (!w[t].is_array() || w[t].size() != mc.N)
      invalid("step " + std::to_string(t) + " must list " + std::to_string(mc.N) + " cells");
    for (std::size_t n = 0; n < mc.N; ++n) {
      const Json &cell = w[t][n];
      if (!cell.is_array() || cell.size() != 2 || !cell[1].is_number() || !(cell[0].is_number() || cell[0].is_null()))
        invalid("cells must be [speed, flow] with a numeric flow");
      x.at(t, n, FeatureTensor::kFlow) = cell[1].get<double>();
      if (cell[0].is_number()) {
        x.at(t, n, FeatureTensor::kSpeed) = cell[0].get<double>();
        x.mask[t * mc.N + n] = 1;
      }
    }
  }
  const FeatureTensor z = normalize(fill_missing_speed(x, ckpt.stats), ckpt.stats);
  const Ma2gcnModel model = restore_model(ckpt);
  const auto input = ad::Tensor::constant({1, mc.P, mc.N, mc.D}, z.values);
  const auto fwd = model.forward(input, ckpt.static_graphs());
  const auto phys = denormalize_values(fwd.prediction.values(), ckpt.stats, mc.D);

  Json pred = Json::array();
  for (std::size_t q = 0; q < mc.Q; ++q) {
    Json step = Json::array();
    for (std::size_t n = 0; n < mc.N; ++n)
      step.push_back(Json::array({phys[(q * mc.N + n) * mc.D + 0], phys[(q * mc.N + n) * mc.D + 1]}));
    pred.push_back(std::move(step));
  }
  Json weights = Json::array();
  for (double v : fwd.attention_weights.values())
    weights.push_back(v);
  return Json{{"schema_version", kArtifactSchemaVersion},
              {"command", "predict"},
              {"model", model_label(mc)},
              {"checkpoint_digest", file_digest(checkpoint)},
              {"prediction", pred},
              {"attention_weights", weights}};
}

Json run_report(const std::vector<fs::path> &run_dirs, const fs::path &out_dir) {
  if (run_dirs.empty())
    throw Error(ErrorKind::ConfigError, "report needs at least one run directory");
  std::string table = "run,model,channel,MAE,MAPE,RMSE\n";
  std::string curve = "run,epoch,train_loss,val_loss\n";
  Json runs = Json::array();
  for (const auto &dir : run_dirs) {
    const Json report = read_json_file(dir / "report.json");
    auto run = dir.filename().string();
    if (run.empty())
      run = dir.parent_path().filename().string();
    auto rows = [&](const std::string &name, const Json &m) {
      for (const char *ch : {"speed", "flow", "combined"})
        table += run + "," + name + "," + ch + "," + fmt(m.at(ch).at("MAE").get<double>()) + "," +
                 fmt(m.at(ch).at("MAPE").get<double>()) + "," + fmt(m.at(ch).at("RMSE").get<double>()) + "\n";
    };
    try {
      rows(report.at("model").get<std::string>(), report.at("test"));
      rows("last-value", report.at("baselines").at("last_value"));
      rows("historical-average", report.at("baselines").at("historical_average"));
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorKind::ValidationError, (dir / "report.json").string() + ": " + e.what());
    }

    std::ifstream log(dir / "epoch_log.csv");
    if (!log)
      throw Error(ErrorKind::IoError, "cannot open " + (dir / "epoch_log.csv").string());
    std::string line;
    std::getline(log, line);
    while (std::getline(log, line)) {
      const auto f = split_csv_line(line);
      if (f.size() < 3)
        throw Error(ErrorKind::ValidationError, (dir / "epoch_log.csv").string() + ": short row");
      curve += run + "," + f[0] + "," + f[1] + "," + f[2] + "\n";
    }
    runs.push_back(Json{{"run", run}, {"report_digest", file_digest(dir / "report.json")}});
  }
  write_text(out_dir / "metrics_table.csv", table);
  write_text(out_dir / "loss_curve.csv", curve);
  return Json{{"schema_version", kArtifactSchemaVersion},
              {"command", "report"},
              {"runs", runs},
              {"outputs", {{"metrics_table.csv", file_digest(out_dir / "metrics_table.csv")},
                           {"loss_curve.csv", file_digest(out_dir / "loss_curve.csv")}}}};
}

} // namespace ma2gcn
