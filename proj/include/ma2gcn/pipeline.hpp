#pragma once

// Subcommand implementations shared by the command-line tool and tests.
// Each writes its artifacts plus a JSON manifest (schema version, input
// digests) and returns that manifest.

#include "ma2gcn/checkpoint.hpp"
#include "ma2gcn/config.hpp"
#include "ma2gcn/grid.hpp"
#include "ma2gcn/mobility.hpp"
#include "ma2gcn/model.hpp"

#include <filesystem>
#include <string>

namespace ma2gcn {

namespace fs = std::filesystem;

inline constexpr int kArtifactSchemaVersion = 1;

// "MA2FEAT\0" | u32 version | u64 T | u64 N | u64 D | i64 start_time
// | i64 interval_seconds | f64 values[T*N*D] | u8 mask[T*N]
void write_feature_file(const fs::path &path, const FeatureTensor &x);
FeatureTensor read_feature_file(const fs::path &path);

// "MA2ENEX\0" | u32 version | u64 S | u64 N | i64 segment_seconds
// | i64 start_time | u64 counts[S*N*N] | f64 mean_travel_time[S*N*N]
void write_entry_exit_file(const fs::path &path, const EntryExitMatrix &e);
EntryExitMatrix read_entry_exit_file(const fs::path &path);

/// Dense matrix as CSV, one row per line, shortest round-trip decimals.
void write_matrix_csv(const fs::path &path, const Matrix &m);
Matrix read_matrix_csv(const fs::path &path);

/// Contents of a build-graph output directory.
struct GraphData {
  GridSpec grid;
  FeatureTensor features;
  Matrix initial, squared, mobility;
  std::string features_digest;
  std::string graph_digest;

  StaticGraphs static_graphs() const { return StaticGraphs::prepare(initial, squared, mobility); }
};

GraphData load_graph_dir(const fs::path &dir);

/// Writes one text file per taxi into `out_dir` and `<out_dir>.json`.
Json run_synth(const SynthConfig &cfg, const std::string &timezone, const fs::path &out_dir);

/// Parses and cleans every file of `input_dir`; writes the binary
/// trajectory file `out` and the ingest report `<out>.json`.
Json run_ingest(const fs::path &input_dir, const BBox &bbox, const std::string &timezone, const fs::path &out);

/// Features, adjacencies and the entry/exit matrix from a trajectory file.
Json run_build_graph(const fs::path &traj_file, const RunConfig &cfg, const fs::path &out_dir);

/// Trains on a build-graph directory. Writes checkpoint.bin,
/// epoch_log.csv, report.json and the resolved config.json to `out_dir`.
/// The model is initialized and shuffled from cfg.train.seed.
Json run_train(const fs::path &graph_dir, const RunConfig &cfg, const fs::path &out_dir, bool verbose = false);

/// Test-split metrics of a checkpoint on a build-graph directory (with the
/// baselines for reference). Throws ValidationError when N differs.
Json run_evaluate(const fs::path &checkpoint, const fs::path &graph_dir, const SplitRatios &split = {});

/// Forecast for one raw window. Input JSON: {"window": P x N x [speed, flow]}
/// in physical units; a null speed is treated as unobserved. Output:
/// {"prediction": Q x N x [speed, flow]}.
Json run_predict(const fs::path &checkpoint, const Json &window);

/// metrics_table.csv (one row per model or baseline and channel, with MAE,
/// MAPE and RMSE) and loss_curve.csv from one or more train directories.
Json run_report(const std::vector<fs::path> &run_dirs, const fs::path &out_dir);

} // namespace ma2gcn
