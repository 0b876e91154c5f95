#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "glformer/model/network.hpp"
#include "glformer/model/params.hpp"
#include "glformer/numcore/adam.hpp"
#include "glformer/tgraph/split.hpp"
#include "glformer/tgraph/store.hpp"
#include "glformer/traineval/config.hpp"
#include "glformer/traineval/evaluate.hpp"

namespace glformer {

struct Timing {
  double fit_seconds = 0.0;
  double eval_seconds = 0.0;
  double total_seconds = 0.0;
};

struct MetricsReport {
  std::vector<double> epoch_losses;  // mean BCE per positive/negative pair
  std::vector<double> val_ap_curve;
  double val_ap = 0.0;
  double val_auc = 0.0;
  std::optional<double> test_ap;
  std::optional<double> test_auc;
  std::size_t best_epoch = 0;
  Timing timing;
};

// Keys `ap`, `auc_roc`, `epoch_losses`, `best_epoch`, `timing`; everything
// except `timing` is deterministic for a fixed seed.
inline nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"ap", {{"val", r.val_ap}, {"test", opt(r.test_ap)}}},
          {"auc_roc", {{"val", r.val_auc}, {"test", opt(r.test_auc)}}},
          {"epoch_losses", r.epoch_losses},
          {"val_ap_curve", r.val_ap_curve},
          {"best_epoch", r.best_epoch},
          {"epochs_run", r.epoch_losses.size()},
          {"timing",
           {{"fit_seconds", r.timing.fit_seconds},
            {"eval_seconds", r.timing.eval_seconds},
            {"total_seconds", r.timing.total_seconds}}}};
}

struct EpochStats {
  std::size_t epoch;
  double loss;
  double val_ap;
  double val_auc;
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct FitResult {
  ModelParams params;  // from the best validation epoch
  MetricsReport report;
};

inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kEpochStreamBase = 1000;

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Fits on split.train, selects by validation AP on split.val. Never touches
// split.test: the store and the negative candidates cover only the train and
// validation prefix.
inline FitResult fit(const ChronologicalSplit& split, const ModelConfig& model_cfg, const TrainConfig& cfg,
                     std::optional<ModelParams> initial = std::nullopt, const EpochCallback& on_epoch = {}) {
  model_cfg.validate();
  cfg.validate();
  if (split.train.empty()) throw ProtocolError("train: empty training split");
  if (split.val.empty()) throw ProtocolError("train: empty validation split");
  const auto start = std::chrono::steady_clock::now();

  const EventStream& stream = split.train.stream();
  const std::size_t seen = split.train.size() + split.val.size();
  const TemporalStore store(stream, seen);
  const auto candidates = negative_candidates(stream, seen);

  ModelParams params;
  if (initial) {
    params = std::move(*initial);
  } else {
    Rng init_rng = make_rng(cfg.seed, kInitStream);
    params = init_model(model_cfg, stream.node_feat_dim, stream.edge_feat_dim, init_rng);
  }
  const std::vector<Matrix*> tensors = params.tensor_ptrs();
  AdamState adam(AdamConfig{cfg.lr}, std::span<const Matrix* const>(tensors.data(), tensors.size()));

  FitResult result{params, {}};
  MetricsReport& report = result.report;
  double best_ap = -std::numeric_limits<double>::infinity();
  double eval_seconds = 0.0;
  std::vector<Matrix> grads(tensors.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, kEpochStreamBase + epoch);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < split.train.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(split.train.size(), begin + cfg.batch_size);
      const LinkBatch batch = sample_link_batch(split.train, begin, end, candidates, rng);
      Tape tape;
      const Var loss = batch_loss(tape, store, batch, model_cfg, params);
      const Gradients g = tape.backward(loss);
      for (std::size_t i = 0; i < tensors.size(); ++i) grads[i] = g.of(*tensors[i]);
      adam_step(adam, tensors, grads);
      epoch_loss += loss.value().item();
    }
    report.epoch_losses.push_back(epoch_loss / static_cast<double>(split.train.size()));

    const auto eval_start = std::chrono::steady_clock::now();
    const EvalResult val = evaluate_split(split.val, candidates, make_rng(cfg.seed, kValNegatives),
                                          ModelScorer{&store, &model_cfg, &params}, cfg.batch_size);
    eval_seconds += seconds_since(eval_start);
    report.val_ap_curve.push_back(val.ap);
    if (on_epoch) on_epoch({epoch, report.epoch_losses.back(), val.ap, val.auc});

    if (val.ap > best_ap) {
      best_ap = val.ap;
      report.best_epoch = epoch;
      report.val_ap = val.ap;
      report.val_auc = val.auc;
      result.params = params;
    }
    if (epoch - report.best_epoch >= cfg.patience) break;
  }
  report.timing.eval_seconds = eval_seconds;
  report.timing.fit_seconds = seconds_since(start) - eval_seconds;
  report.timing.total_seconds = seconds_since(start);
  return result;
}

// Test metrics on the full stream: later test queries see earlier test
// interactions as history.
inline EvalResult evaluate_test(const ChronologicalSplit& split, const ModelConfig& model_cfg,
                                const ModelParams& params, std::uint64_t seed, std::size_t batch_size = 200) {
  const EventStream& stream = split.test.stream();
  const TemporalStore store(stream);
  const auto candidates = negative_candidates(stream);
  return evaluate_split(split.test, candidates, make_rng(seed, kTestNegatives),
                        ModelScorer{&store, &model_cfg, &params}, batch_size);
}

// Chronological 70/15/15 split (ratios from cfg), fit, then test evaluation
// with the best-validation parameters.
inline FitResult train(const EventStream& stream, const ModelConfig& model_cfg, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const ChronologicalSplit split = chronological_split(stream, cfg.train_ratio, cfg.val_ratio);
  if (split.test.empty()) throw ProtocolError("train: empty test split");
  FitResult r = fit(split, model_cfg, cfg, std::nullopt, on_epoch);
  const auto eval_start = std::chrono::steady_clock::now();
  const EvalResult test = evaluate_test(split, model_cfg, r.params, cfg.seed, cfg.batch_size);
  r.report.test_ap = test.ap;
  r.report.test_auc = test.auc;
  r.report.timing.eval_seconds += seconds_since(eval_start);
  r.report.timing.total_seconds = seconds_since(start);
  return r;
}

}  // namespace glformer
