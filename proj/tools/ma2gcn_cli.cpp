// ma2gcn: trajectory -> graph -> forecast pipeline.

#include "ma2gcn/config.hpp"
#include "ma2gcn/error.hpp"
#include "ma2gcn/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace ma2gcn;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
  case ErrorKind::ConfigError:
    return 2;
  case ErrorKind::IoError:
    return 3;
  case ErrorKind::ValidationError:
  case ErrorKind::ConfigMismatch:
  case ErrorKind::ShapeMismatch:
  case ErrorKind::EmptyDataset:
  case ErrorKind::TooShort:
  case ErrorKind::TooFew:
    return 4;
  default:
    return 1;
  }
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> tz;
};

RunConfig resolve(const Common &c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.synth.seed = *c.seed;
  }
  if (c.tz)
    cfg.timezone = *c.tz;
  return cfg;
}

void emit(const Json &j, const std::string &out) {
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(out, j);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"MA2GCN traffic forecasting toolkit"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", common.config_path, "JSON run configuration");
    sub->add_option("--seed", common.seed, "Seed for every random choice");
    sub->add_option("--tz", common.tz, "Time zone of record timestamps (UTC, +08:00, Asia/Shanghai)");
  };

  // config
  std::string preset = "full";
  auto *config_cmd = app.add_subcommand("config", "Print a complete default configuration");
  config_cmd->add_option("--preset", preset, "full or synthetic")->check(CLI::IsMember({"full", "synthetic"}));

  // synth
  std::optional<std::size_t> taxis;
  std::optional<double> hours;
  std::string synth_out;
  auto *synth = app.add_subcommand("synth", "Generate synthetic taxi trajectories");
  add_common(synth);
  synth->add_option("--taxis", taxis, "Number of taxis");
  synth->add_option("--hours", hours, "Simulated duration in hours");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // ingest
  std::string ingest_in, ingest_out, ingest_bbox;
  auto *ingest = app.add_subcommand("ingest", "Parse and clean raw trajectory files");
  add_common(ingest);
  ingest->add_option("--input", ingest_in, "Directory of per-taxi text files")->required();
  ingest->add_option("--bbox", ingest_bbox, "LON1,LAT1,LON2,LAT2 (defaults to the configured grid bbox)");
  ingest->add_option("--out", ingest_out, "Binary trajectory file to write")->required();

  // build-graph
  std::string bg_traj, bg_out, bg_bbox;
  std::optional<std::size_t> grid_size, mob_segment;
  std::optional<std::int64_t> interval;
  std::optional<double> segment_hours, kappa;
  auto *build = app.add_subcommand("build-graph", "Grid features, adjacencies and the entry/exit matrix");
  add_common(build);
  build->add_option("--traj", bg_traj, "Trajectory file from ingest")->required();
  build->add_option("--bbox", bg_bbox, "LON1,LAT1,LON2,LAT2");
  build->add_option("--grid-size", grid_size, "Cells per side (M)");
  build->add_option("--interval", interval, "Aggregation interval in seconds");
  build->add_option("--segment-hours", segment_hours, "Entry/exit segment length in hours");
  build->add_option("--kappa", kappa, "Mobility scale");
  build->add_option("--mobility-segment", mob_segment, "Segment used for the mobility adjacency");
  build->add_option("--out", bg_out, "Output directory")->required();

  // train
  std::string train_data, train_out;
  std::optional<std::size_t> epochs;
  bool verbose = false;
  auto *train_cmd = app.add_subcommand("train", "Train on a build-graph directory");
  add_common(train_cmd);
  train_cmd->add_option("--data", train_data, "build-graph output directory")->required();
  train_cmd->add_option("--epochs", epochs, "Override the configured epoch count");
  train_cmd->add_option("--out", train_out, "Run directory")->required();
  train_cmd->add_flag("--verbose", verbose, "Log every epoch to stderr");

  // evaluate
  std::string eval_ckpt, eval_data, eval_out;
  auto *eval = app.add_subcommand("evaluate", "Test-split metrics of a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint.bin")->required();
  eval->add_option("--data", eval_data, "build-graph output directory")->required();
  eval->add_option("--out", eval_out, "Write the JSON result here instead of stdout");

  // predict
  std::string pred_ckpt, pred_window, pred_out;
  auto *predict = app.add_subcommand("predict", "Forecast one window");
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint.bin")->required();
  predict->add_option("--window", pred_window, "JSON file {\"window\": P x N x [speed, flow]}")->required();
  predict->add_option("--out", pred_out, "Write the JSON result here instead of stdout");

  // report
  std::vector<std::string> report_runs;
  std::string report_out;
  auto *report = app.add_subcommand("report", "Metric table and loss curves as CSV");
  report->add_option("--runs", report_runs, "Run directories written by train")->required();
  report->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*config_cmd) {
      std::cout << to_json(preset == "synthetic" ? RunConfig::synthetic_defaults() : RunConfig{}).dump(2) << '\n';
    } else if (*synth) {
      RunConfig cfg = common.config_path.empty() ? RunConfig::synthetic_defaults() : resolve(common);
      if (common.seed)
        cfg.synth.seed = *common.seed;
      if (common.tz)
        cfg.timezone = *common.tz;
      if (taxis)
        cfg.synth.taxis = *taxis;
      if (hours)
        cfg.synth.hours = *hours;
      emit(run_synth(cfg.synth, cfg.timezone, synth_out), "");
    } else if (*ingest) {
      const RunConfig cfg = resolve(common);
      const BBox box = ingest_bbox.empty() ? cfg.grid.bbox : BBox::parse(ingest_bbox);
      emit(run_ingest(ingest_in, box, cfg.timezone, ingest_out), "");
    } else if (*build) {
      RunConfig cfg = resolve(common);
      if (!bg_bbox.empty())
        cfg.grid.bbox = BBox::parse(bg_bbox);
      if (grid_size)
        cfg.grid.M = *grid_size;
      if (interval)
        cfg.grid.interval_seconds = *interval;
      if (segment_hours)
        cfg.mobility.segment_seconds = static_cast<std::int64_t>(*segment_hours * 3600.0);
      if (kappa)
        cfg.mobility.kappa = *kappa;
      if (mob_segment)
        cfg.mobility_segment = *mob_segment;
      emit(run_build_graph(bg_traj, cfg, bg_out), "");
    } else if (*train_cmd) {
      RunConfig cfg = resolve(common);
      if (epochs)
        cfg.train.epochs = *epochs;
      emit(run_train(train_data, cfg, train_out, verbose), "");
    } else if (*eval) {
      const RunConfig cfg = resolve(common);
      emit(run_evaluate(eval_ckpt, eval_data, cfg.split), eval_out);
    } else if (*predict) {
      emit(run_predict(pred_ckpt, read_json_file(pred_window)), pred_out);
    } else if (*report) {
      std::vector<fs::path> dirs(report_runs.begin(), report_runs.end());
      emit(run_report(dirs, report_out), "");
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::IoError);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
