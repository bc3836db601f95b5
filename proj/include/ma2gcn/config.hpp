#pragma once

#include "ma2gcn/grid.hpp"
#include "ma2gcn/mobility.hpp"
#include "ma2gcn/model.hpp"
#include "ma2gcn/synthetic.hpp"
#include "ma2gcn/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ma2gcn {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigSchemaVersion = 1;

struct PathsConfig {
  std::string raw_dir = "data/raw";
  std::string trajectories = "data/trajectories.bin";
  std::string graph_dir = "data/graph";
  std::string run_dir = "runs/default";
};

/// Everything one pipeline run needs. Defaults are the published settings
/// (15 x 15 grid, 5 min intervals, 12 -> 1 windows, K = 3, H = H' = 128,
/// 3 blocks, lr 0.001, weight decay 0.0001, batch 8, 100 epochs).
struct RunConfig {
  GridSpec grid{{120.85, 30.67, 122.20, 31.88}, 15, 300};
  std::string timezone = "Asia/Shanghai";
  MobilityParams mobility;
  std::size_t mobility_segment = 0;
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  SplitRatios split;
  SynthConfig synth = SynthConfig::defaults();
  PathsConfig paths;

  /// Desk-scale settings matching the default synthetic dataset.
  static RunConfig synthetic_defaults();
  /// Throws ConfigError.
  void validate() const;
};

// JSON conversion. Readers reject unknown keys and wrong types with
// ConfigError; missing keys keep their defaults.
Json to_json(const GridSpec &g);
Json to_json(const MobilityParams &m);
Json to_json(const ModelConfig &m);
Json to_json(const TrainConfig &t);
Json to_json(const LossConfig &l);
Json to_json(const SplitRatios &s);
Json to_json(const SynthConfig &s);
Json to_json(const FeatureStats &s);
Json to_json(const ForecastMetrics &m);
Json to_json(const RunConfig &c);

void from_json(const Json &j, GridSpec &g);
void from_json(const Json &j, MobilityParams &m);
void from_json(const Json &j, ModelConfig &m);
void from_json(const Json &j, TrainConfig &t);
void from_json(const Json &j, LossConfig &l);
void from_json(const Json &j, SplitRatios &s);
void from_json(const Json &j, SynthConfig &s);
void from_json(const Json &j, FeatureStats &s);
void from_json(const Json &j, RunConfig &c);

RunConfig parse_run_config(const Json &j);
/// Throws ConfigError when the file is missing or invalid.
RunConfig load_run_config(const std::filesystem::path &path);

Json read_json_file(const std::filesystem::path &path);
/// Pretty-printed with a trailing newline; throws IoError.
void write_json_file(const std::filesystem::path &path, const Json &j);

/// Hex FNV-1a 64 digest of a file's bytes (provenance only, not security).
std::string file_digest(const std::filesystem::path &path);
std::string bytes_digest(std::string_view bytes);

} // namespace ma2gcn
