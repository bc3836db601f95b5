#pragma once

#include "ma2gcn/grid.hpp"
#include "ma2gcn/model.hpp"
#include "ma2gcn/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ma2gcn {

/// One (P -> Q) forecasting example cut from contiguous intervals.
struct WindowSample {
  std::vector<double> input;  // P*N*D
  std::vector<double> target; // Q*N*D
  std::size_t t0 = 0;         // interval index of the first target step
};

/// T - P - Q + 1 chronologically ordered windows. Throws TooShort when
/// T < P + Q.
std::vector<WindowSample> make_windows(const FeatureTensor &x, std::size_t P, std::size_t Q);

struct DatasetSplit {
  std::vector<WindowSample> train, val, test;
};

struct SplitRatios {
  std::size_t train = 7, val = 2, test = 1;
};

/// Chronological split; val and test sizes are floored and the remainder
/// goes to train. Throws TooFew below 10 samples.
DatasetSplit split_dataset(std::vector<WindowSample> samples, SplitRatios ratios = {});

/// Number of leading intervals touched by the first `train_count` windows,
/// i.e. the range feature statistics may be fitted on.
std::size_t training_intervals(std::size_t train_count, std::size_t P, std::size_t Q);

struct LossConfig {
  double theta = 0.5; // weight of the speed term

  void validate() const;
};

/// theta * MAE(speed) + (1 - theta) * MAE(flow); the last axis is D.
ad::Tensor loss_fn(const ad::Tensor &pred, const ad::Tensor &truth, const LossConfig &cfg);

struct ErrorMetrics {
  double mae = 0.0;
  double mape = 0.0; // fraction, entries with |truth| <= 1e-6 excluded
  double rmse = 0.0;
  std::size_t count = 0;
  std::size_t mape_count = 0;
};

struct ForecastMetrics {
  ErrorMetrics speed, flow, combined;
};

inline constexpr double kMapeEpsilon = 1e-6;

ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth);
/// pred/truth laid out with D innermost; channel 0 speed, 1 flow.
ForecastMetrics metrics(std::span<const double> pred, std::span<const double> truth, std::size_t D = 2);

struct TrainConfig {
  double lr = 0.001;
  double weight_decay = 0.0001;
  std::size_t batch = 8;
  std::size_t epochs = 100;
  std::uint64_t seed = 7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;

  void validate() const;
};

/// Adaptive-moment gradient descent with decoupled weight decay.
class AdamW {
public:
  AdamW(const ParameterSet &params, const TrainConfig &cfg);

  /// One update from the parameters' accumulated gradients.
  void step(ParameterSet &params);

  std::uint64_t steps() const { return t_; }
  const std::vector<double> &first_moment() const { return m_; }
  const std::vector<double> &second_moment() const { return v_; }
  void load_state(std::uint64_t steps, std::vector<double> m, std::vector<double> v);

private:
  TrainConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet &params, double max_norm);

/// Everything a training run consumes: normalized windows plus the
/// statistics needed to report de-normalized metrics.
struct ForecastData {
  FeatureTensor raw;        // aggregated, before fill/normalization
  FeatureTensor normalized; // filled + z-scored
  FeatureStats stats;
  DatasetSplit split;
  StaticGraphs graphs;
  std::size_t P = 12, Q = 1;
};

/// Windows, split and statistics from a raw feature tensor; stats are fitted
/// on the training range only unless `fixed_stats` is given (e.g. the
/// statistics stored with a trained model).
ForecastData prepare_forecast_data(const FeatureTensor &raw, const StaticGraphs &graphs, std::size_t P,
                                   std::size_t Q, SplitRatios ratios = {},
                                   const FeatureStats *fixed_stats = nullptr);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
  double val_mape = 0.0;
  double val_rmse = 0.0;
  double seconds = 0.0; // wall clock; excluded from reproducibility comparisons
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t optimizer_steps = 0;
  std::vector<double> adam_m, adam_v;
};

/// Mini-batch training; the model ends holding the best-validation
/// parameters. Throws Divergence on a non-finite loss.
TrainResult train(Ma2gcnModel &model, const ForecastData &data, const TrainConfig &tc, const LossConfig &lc,
                  bool verbose = false);

/// Stacks windows into (B,P,N,D) inputs or (B,Q,N,D) targets.
ad::Tensor batch_inputs(std::span<const WindowSample> samples, std::size_t P, std::size_t N, std::size_t D);
ad::Tensor batch_targets(std::span<const WindowSample> samples, std::size_t Q, std::size_t N, std::size_t D);

/// Normalized predictions for every sample, concatenated (Q*N*D each).
std::vector<double> predict_normalized(const Ma2gcnModel &model, const StaticGraphs &graphs,
                                       std::span<const WindowSample> samples, std::size_t batch = 8);

/// Mean loss over samples, evaluated in batches.
double evaluate_loss(const Ma2gcnModel &model, const StaticGraphs &graphs, std::span<const WindowSample> samples,
                     const LossConfig &lc, std::size_t batch = 8);

/// Converts concatenated normalized (.., D) values to physical units.
std::vector<double> denormalize_values(std::span<const double> z, const FeatureStats &stats, std::size_t D = 2);

/// Targets of every sample, concatenated.
std::vector<double> concat_targets(std::span<const WindowSample> samples);

ForecastMetrics evaluate_metrics(const Ma2gcnModel &model, const ForecastData &data,
                                 std::span<const WindowSample> samples);

enum class BaselineKind { LastValue, HistoricalAverage };

/// Normalized predictions for each sample. LastValue repeats input step P-1;
/// HistoricalAverage predicts the training-range mean of the same
/// (time-of-day slot, cell), falling back to the cell's training mean.
std::vector<double> baseline_predict(BaselineKind kind, const ForecastData &data,
                                     std::span<const WindowSample> samples);

} // namespace ma2gcn
