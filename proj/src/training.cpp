#include "ma2gcn/training.hpp"

#include "ma2gcn/error.hpp"
#include "ma2gcn/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>

namespace ma2gcn {

using ad::Tensor;

std::vector<WindowSample> make_windows(const FeatureTensor &x, std::size_t P, std::size_t Q) {
  if (P == 0 || Q == 0)
    throw Error(ErrorKind::ConfigError, "P and Q must be positive");
  if (x.T < P + Q)
    throw Error(ErrorKind::TooShort, "T=" + std::to_string(x.T) + " is shorter than P+Q=" + std::to_string(P + Q));
  const std::size_t step = x.N * x.D;
  std::vector<WindowSample> out;
  out.reserve(x.T - P - Q + 1);
  for (std::size_t start = 0; start + P + Q <= x.T; ++start) {
    WindowSample w;
    w.t0 = start + P;
    const auto base = x.values.begin() + static_cast<std::ptrdiff_t>(start * step);
    w.input.assign(base, base + static_cast<std::ptrdiff_t>(P * step));
    w.target.assign(base + static_cast<std::ptrdiff_t>(P * step), base + static_cast<std::ptrdiff_t>((P + Q) * step));
    out.push_back(std::move(w));
  }
  return out;
}

DatasetSplit split_dataset(std::vector<WindowSample> samples, SplitRatios ratios) {
  const std::size_t n = samples.size();
  if (n < 10)
    throw Error(ErrorKind::TooFew, "need at least 10 windows to split, got " + std::to_string(n));
  const std::size_t total = ratios.train + ratios.val + ratios.test;
  if (total == 0)
    throw Error(ErrorKind::ConfigError, "split ratios sum to zero");
  const std::size_t n_val = n * ratios.val / total;
  const std::size_t n_test = n * ratios.test / total;
  const std::size_t n_train = n - n_val - n_test;
  DatasetSplit s;
  auto it = std::make_move_iterator(samples.begin());
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(samples.end()));
  return s;
}

std::size_t training_intervals(std::size_t train_count, std::size_t P, std::size_t Q) {
  return train_count == 0 ? 0 : train_count + P + Q - 1;
}

void LossConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw Error(ErrorKind::ConfigError, "loss.theta must lie in [0, 1]");
}

Tensor loss_fn(const Tensor &pred, const Tensor &truth, const LossConfig &cfg) {
  if (pred.shape() != truth.shape() || pred.rank() < 1 || pred.shape().back() < 2)
    throw Error(ErrorKind::ShapeMismatch, "loss_fn: pred " + ad::shape_str(pred.shape()) + " vs truth " +
                                              ad::shape_str(truth.shape()));
  const std::size_t last = pred.rank() - 1;
  const Tensor err = ad::abs(ad::sub(pred, truth));
  const Tensor speed = ad::mean(ad::take(err, last, FeatureTensor::kSpeed));
  const Tensor flow = ad::mean(ad::take(err, last, FeatureTensor::kFlow));
  return ad::add(ad::scale(speed, cfg.theta), ad::scale(flow, 1.0 - cfg.theta));
}

ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw Error(ErrorKind::ShapeMismatch, "metrics: prediction and truth lengths differ");
  ErrorMetrics m;
  m.count = pred.size();
  if (m.count == 0)
    return m;
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(truth[i]) > kMapeEpsilon) {
      pct_sum += std::abs(e / truth[i]);
      ++m.mape_count;
    }
  }
  const double n = static_cast<double>(m.count);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = m.mape_count ? pct_sum / static_cast<double>(m.mape_count) : 0.0;
  return m;
}

ForecastMetrics metrics(std::span<const double> pred, std::span<const double> truth, std::size_t D) {
  if (pred.size() != truth.size() || D < 2 || pred.size() % D != 0)
    throw Error(ErrorKind::ShapeMismatch, "metrics: prediction and truth lengths differ");
  std::vector<double> ps, ts, pf, tf;
  for (std::size_t i = 0; i < pred.size(); i += D) {
    ps.push_back(pred[i + FeatureTensor::kSpeed]);
    ts.push_back(truth[i + FeatureTensor::kSpeed]);
    pf.push_back(pred[i + FeatureTensor::kFlow]);
    tf.push_back(truth[i + FeatureTensor::kFlow]);
  }
  return {error_metrics(ps, ts), error_metrics(pf, tf), error_metrics(pred, truth)};
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || batch == 0 || epochs == 0)
    throw Error(ErrorKind::ConfigError, "train.lr, train.batch and train.epochs must be positive");
  if (weight_decay < 0.0 || clip_norm <= 0.0)
    throw Error(ErrorKind::ConfigError, "train.weight_decay must be >= 0 and clip_norm > 0");
}

// ---- optimizer -------------------------------------------------------------------

AdamW::AdamW(const ParameterSet &params, const TrainConfig &cfg)
    : cfg_(cfg), m_(params.scalar_count(), 0.0), v_(params.scalar_count(), 0.0) {}

void AdamW::load_state(std::uint64_t steps, std::vector<double> m, std::vector<double> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw Error(ErrorKind::ValidationError, "optimizer state size mismatch");
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

void AdamW::step(ParameterSet &params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t off = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto &p = params.at(k);
    const auto g = p.grad();
    auto w = p.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i, ++off) {
      const double gi = g.empty() ? 0.0 : g[i];
      m_[off] = cfg_.beta1 * m_[off] + (1.0 - cfg_.beta1) * gi;
      v_[off] = cfg_.beta2 * v_[off] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m_[off] / bc1;
      const double vhat = v_[off] / bc2;
      w[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + cfg_.weight_decay * w[i]);
    }
  }
}

double clip_grad_norm(ParameterSet &params, double max_norm) {
  double sq = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (double g : params.at(k).grad())
      sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (std::size_t k = 0; k < params.size(); ++k)
      params.at(k).scale_grad(factor);
  }
  return norm;
}

// ---- data --------------------------------------------------------------------------

ForecastData prepare_forecast_data(const FeatureTensor &raw, const StaticGraphs &graphs, std::size_t P,
                                   std::size_t Q, SplitRatios ratios, const FeatureStats *fixed_stats) {
  if (raw.T < P + Q)
    throw Error(ErrorKind::TooShort, "T=" + std::to_string(raw.T) + " is shorter than P+Q=" + std::to_string(P + Q));
  if (graphs.initial.defined() && graphs.N() != raw.N)
    throw Error(ErrorKind::ValidationError, "graphs and features disagree on N");
  const std::size_t n_windows = raw.T - P - Q + 1;
  const std::size_t total = ratios.train + ratios.val + ratios.test;
  if (n_windows < 10)
    throw Error(ErrorKind::TooFew, "need at least 10 windows to split, got " + std::to_string(n_windows));
  const std::size_t n_train = n_windows - n_windows * ratios.val / total - n_windows * ratios.test / total;

  ForecastData d;
  d.raw = raw;
  d.P = P;
  d.Q = Q;
  d.graphs = graphs;
  if (fixed_stats) {
    if (fixed_stats->cell_speed_mean.size() != raw.N)
      throw Error(ErrorKind::ValidationError, "statistics and features disagree on N");
    d.stats = *fixed_stats;
    d.normalized = normalize(fill_missing_speed(raw, d.stats), d.stats);
  } else {
    auto nf = fill_and_normalize(raw, training_intervals(n_train, P, Q));
    d.normalized = std::move(nf.features);
    d.stats = std::move(nf.stats);
  }
  d.split = split_dataset(make_windows(d.normalized, P, Q), ratios);
  return d;
}

Tensor batch_inputs(std::span<const WindowSample> samples, std::size_t P, std::size_t N, std::size_t D) {
  std::vector<double> v;
  v.reserve(samples.size() * P * N * D);
  for (const auto &s : samples)
    v.insert(v.end(), s.input.begin(), s.input.end());
  return Tensor::constant({samples.size(), P, N, D}, std::move(v));
}

Tensor batch_targets(std::span<const WindowSample> samples, std::size_t Q, std::size_t N, std::size_t D) {
  std::vector<double> v;
  v.reserve(samples.size() * Q * N * D);
  for (const auto &s : samples)
    v.insert(v.end(), s.target.begin(), s.target.end());
  return Tensor::constant({samples.size(), Q, N, D}, std::move(v));
}

std::vector<double> predict_normalized(const Ma2gcnModel &model, const StaticGraphs &graphs,
                                       std::span<const WindowSample> samples, std::size_t batch) {
  const auto &c = model.config();
  std::vector<double> out;
  out.reserve(samples.size() * c.Q * c.N * c.D);
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    const auto chunk = samples.subspan(i, std::min(batch, samples.size() - i));
    const auto r = model.forward(batch_inputs(chunk, c.P, c.N, c.D), graphs);
    out.insert(out.end(), r.prediction.values().begin(), r.prediction.values().end());
  }
  return out;
}

double evaluate_loss(const Ma2gcnModel &model, const StaticGraphs &graphs, std::span<const WindowSample> samples,
                     const LossConfig &lc, std::size_t batch) {
  const auto &c = model.config();
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    const auto chunk = samples.subspan(i, std::min(batch, samples.size() - i));
    const auto r = model.forward(batch_inputs(chunk, c.P, c.N, c.D), graphs);
    total += loss_fn(r.prediction, batch_targets(chunk, c.Q, c.N, c.D), lc).item() * static_cast<double>(chunk.size());
  }
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

std::vector<double> denormalize_values(std::span<const double> z, const FeatureStats &stats, std::size_t D) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = stats.denormalize_value(z[i], i % D);
  return out;
}

std::vector<double> concat_targets(std::span<const WindowSample> samples) {
  std::vector<double> v;
  for (const auto &s : samples)
    v.insert(v.end(), s.target.begin(), s.target.end());
  return v;
}

ForecastMetrics evaluate_metrics(const Ma2gcnModel &model, const ForecastData &data,
                                 std::span<const WindowSample> samples) {
  const auto pred = denormalize_values(predict_normalized(model, data.graphs, samples), data.stats);
  const auto truth = denormalize_values(concat_targets(samples), data.stats);
  return metrics(pred, truth);
}

// ---- training loop -------------------------------------------------------------------

TrainResult train(Ma2gcnModel &model, const ForecastData &data, const TrainConfig &tc, const LossConfig &lc,
                  bool verbose) {
  tc.validate();
  lc.validate();
  const auto &c = model.config();
  if (c.N != data.normalized.N || c.P != data.P || c.Q != data.Q || c.D != data.normalized.D)
    throw Error(ErrorKind::ConfigMismatch, "model config does not match the prepared data");
  const auto &train_set = data.split.train;
  if (train_set.empty())
    throw Error(ErrorKind::TooFew, "empty training split");

  auto &params = model.parameters();
  AdamW opt(params, tc);
  Rng rng(Rng::derive(tc.seed, 0x7472616e));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best = params.snapshot();
  std::vector<WindowSample> batch;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += tc.batch) {
      batch.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + tc.batch); ++j)
        batch.push_back(train_set[order[j]]);
      const auto r = model.forward(batch_inputs(batch, c.P, c.N, c.D), data.graphs);
      const Tensor loss = loss_fn(r.prediction, batch_targets(batch, c.Q, c.N, c.D), lc);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw Error(ErrorKind::Divergence, "non-finite training loss at epoch " + std::to_string(epoch) +
                                               ", step " + std::to_string(opt.steps() + 1));
      params.zero_grad();
      ad::backward(loss);
      const double norm = clip_grad_norm(params, tc.clip_norm);
      if (!std::isfinite(norm))
        throw Error(ErrorKind::Divergence, "non-finite gradient norm at epoch " + std::to_string(epoch));
      opt.step(params);
      loss_sum += value * static_cast<double>(batch.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(order.size());
    log.val_loss = evaluate_loss(model, data.graphs, data.split.val, lc, tc.batch);
    if (!std::isfinite(log.val_loss))
      throw Error(ErrorKind::Divergence, "non-finite validation loss at epoch " + std::to_string(epoch));
    const auto vm = evaluate_metrics(model, data, data.split.val).combined;
    log.val_mae = vm.mae;
    log.val_mape = vm.mape;
    log.val_rmse = vm.rmse;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log.val_loss < result.best_val_loss) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      best = params.snapshot();
    }
    if (verbose)
      std::cerr << "epoch " << epoch << "  train " << std::setprecision(5) << log.train_loss << "  val "
                << log.val_loss << "  val_mae " << log.val_mae << "  (" << std::setprecision(3) << log.seconds
                << " s)\n";
    result.log.push_back(log);
  }
  params.restore(best);
  result.optimizer_steps = opt.steps();
  result.adam_m = opt.first_moment();
  result.adam_v = opt.second_moment();
  return result;
}

// ---- baselines --------------------------------------------------------------------------

std::vector<double> baseline_predict(BaselineKind kind, const ForecastData &data,
                                     std::span<const WindowSample> samples) {
  const auto &x = data.normalized;
  const std::size_t step = x.N * x.D, P = data.P, Q = data.Q;
  std::vector<double> out;
  out.reserve(samples.size() * Q * step);
  if (kind == BaselineKind::LastValue) {
    for (const auto &s : samples)
      for (std::size_t q = 0; q < Q; ++q)
        out.insert(out.end(), s.input.begin() + static_cast<std::ptrdiff_t>((P - 1) * step),
                   s.input.begin() + static_cast<std::ptrdiff_t>(P * step));
    return out;
  }

  const std::int64_t day = 86400;
  const auto slots = static_cast<std::size_t>(std::max<std::int64_t>(1, day / x.interval_seconds));
  auto slot_of = [&](std::size_t t) {
    const std::int64_t ts = x.start_time + static_cast<std::int64_t>(t) * x.interval_seconds;
    return static_cast<std::size_t>(((ts % day) + day) % day / x.interval_seconds) % slots;
  };
  const std::size_t fit = std::min(data.stats.fit_intervals, x.T);
  std::vector<double> slot_sum(slots * step, 0.0), cell_sum(step, 0.0);
  std::vector<std::size_t> slot_count(slots, 0);
  for (std::size_t t = 0; t < fit; ++t) {
    const std::size_t s = slot_of(t);
    ++slot_count[s];
    for (std::size_t k = 0; k < step; ++k) {
      slot_sum[s * step + k] += x.values[t * step + k];
      cell_sum[k] += x.values[t * step + k];
    }
  }
  for (const auto &sample : samples)
    for (std::size_t q = 0; q < Q; ++q) {
      const std::size_t s = slot_of(sample.t0 + q);
      for (std::size_t k = 0; k < step; ++k)
        out.push_back(slot_count[s] ? slot_sum[s * step + k] / static_cast<double>(slot_count[s])
                                    : (fit ? cell_sum[k] / static_cast<double>(fit) : 0.0));
    }
  return out;
}

} // namespace ma2gcn
