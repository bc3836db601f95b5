#pragma once

#include "ma2gcn/grid.hpp"
#include "ma2gcn/model.hpp"
#include "ma2gcn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ma2gcn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A trained model plus what is needed to use it on new windows.
//   "MA2CKPT\0" | u32 version | u64 manifest_len | manifest JSON bytes
//   | f64 parameters (manifest order) | f64 adam m | f64 adam v
//   | f64 A, A^2, A_mo (N*N each, when present)
struct Checkpoint {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  FeatureStats stats;
  std::vector<std::string> names;
  std::vector<ad::Shape> shapes;
  std::vector<double> parameters;
  std::uint64_t optimizer_steps = 0;
  std::vector<double> adam_m, adam_v; // empty when not saved
  std::string data_digest;            // digest of the feature file trained on
  // Static adjacencies the model was trained with, so a checkpoint can
  // forecast on its own. Empty when not saved.
  Matrix initial, squared, mobility;

  bool has_graphs() const { return initial.size() > 0; }
  StaticGraphs static_graphs() const;
};

Checkpoint make_checkpoint(const Ma2gcnModel &model, const FeatureStats &stats, const LossConfig &lc,
                           const TrainConfig &tc, const TrainResult *result, std::string data_digest);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
/// Throws IoError on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path &path);

/// Builds the model described by the checkpoint and loads its parameters.
/// Throws IoError when parameter names or shapes disagree with the config.
Ma2gcnModel restore_model(const Checkpoint &ckpt);

} // namespace ma2gcn
