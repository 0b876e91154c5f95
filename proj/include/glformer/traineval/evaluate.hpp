#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "glformer/model/network.hpp"
#include "glformer/tgraph/sampling.hpp"
#include "glformer/tgraph/split.hpp"
#include "glformer/traineval/metrics.hpp"

namespace glformer {

struct PairScores {
  std::vector<double> pos;
  std::vector<double> neg;
};

struct EvalResult {
  double ap = 0.0;
  double auc = 0.0;
  std::size_t pairs = 0;
};

// Independent generator per (seed, stream id) so val, test and each training
// epoch draw from unrelated sequences.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

inline constexpr std::uint64_t kValNegatives = 1;
inline constexpr std::uint64_t kTestNegatives = 2;

// One negative per event in `split`, same source and time, destination drawn
// uniformly from `candidates` without the true one.
inline LinkBatch sample_link_batch(const EventSplit& split, std::size_t begin, std::size_t end,
                                   std::span<const NodeId> candidates, Rng& rng) {
  LinkBatch b;
  b.src.reserve(end - begin);
  b.dst.reserve(end - begin);
  b.neg.reserve(end - begin);
  b.t.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const Event& e = split[i];
    b.src.push_back(e.src);
    b.dst.push_back(e.dst);
    b.neg.push_back(sample_negative(rng, e.src, e.dst, candidates));
    b.t.push_back(e.t);
  }
  return b;
}

// Scores every event of `split` against a negative drawn from `rng` and
// reports AP and AUC over the union. `scorer(const LinkBatch&) -> PairScores`.
template <class Scorer>
EvalResult evaluate_split(const EventSplit& split, std::span<const NodeId> candidates, Rng rng, Scorer&& scorer,
                          std::size_t batch_size = 200) {
  if (split.empty()) throw ProtocolError("evaluate: empty split");
  if (batch_size == 0) throw ContractError("evaluate: batch size must be positive");
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(2 * split.size());
  labels.reserve(2 * split.size());
  for (std::size_t begin = 0; begin < split.size(); begin += batch_size) {
    const std::size_t end = std::min(split.size(), begin + batch_size);
    const LinkBatch batch = sample_link_batch(split, begin, end, candidates, rng);
    const PairScores s = scorer(batch);
    if (s.pos.size() != batch.size() || s.neg.size() != batch.size()) {
      throw DimensionError("evaluate: scorer returned the wrong number of scores");
    }
    for (double v : s.pos) {
      scores.push_back(v);
      labels.push_back(1);
    }
    for (double v : s.neg) {
      scores.push_back(v);
      labels.push_back(0);
    }
  }
  return {average_precision(scores, labels), auc_roc(scores, labels), split.size()};
}

// Scorer backed by the model; node representations come from `store`.
struct ModelScorer {
  const TemporalStore* store;
  const ModelConfig* config;
  const ModelParams* params;

  PairScores operator()(const LinkBatch& batch) const {
    Tape tape(false);
    const LinkScores s = score_batch(tape, *store, batch, *config, *params);
    return {s.pos.value().values(), s.neg.value().values()};
  }
};

inline EvalResult evaluate(const ModelParams& params, const ModelConfig& config, const TemporalStore& store,
                           const EventSplit& split, std::span<const NodeId> candidates, std::uint64_t seed,
                           std::size_t batch_size = 200) {
  return evaluate_split(split, candidates, make_rng(seed, 0), ModelScorer{&store, &config, &params}, batch_size);
}

}  // namespace glformer
