#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "glformer/encoders.hpp"
#include "glformer/mixers/block.hpp"
#include "glformer/model/config.hpp"
#include "glformer/model/params.hpp"
#include "glformer/tgraph/store.hpp"

namespace glformer {

struct NodeQuery {
  NodeId node;
  double t;
};

// Representations Z for a batch of (node, time) queries, one row each:
// recent neighbors -> tokens -> L token blocks -> mean over token rows.
// All sequences run through the stack together as row segments.
inline Var encode_nodes(Tape& tape, const TemporalStore& store, std::span<const NodeQuery> queries,
                        const ModelConfig& config, const ModelParams& params) {
  const auto specs = config.layer_specs();
  if (params.layers.size() != specs.size()) {
    throw ConfigError("model has " + std::to_string(params.layers.size()) + " layers, config expects " +
                      std::to_string(specs.size()));
  }
  std::vector<NeighborSequence> seqs;
  std::vector<double> t_refs;
  seqs.reserve(queries.size());
  t_refs.reserve(queries.size());
  for (const NodeQuery& q : queries) {
    seqs.push_back(store.recent_neighbors(q.node, q.t, config.n_max));
    t_refs.push_back(q.t);
  }
  const std::size_t pad = config.mixer == MixerKind::Mlp ? config.n_max : 0;
  const TokenBatch batch = embed_batch(tape, seqs, t_refs, store.stream(), params.encoder, pad);
  Var x = batch.tokens;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    x = token_block(x, batch.times, specs[l], params.layers[l], config.ablation, batch.starts);
  }
  return ad::segment_mean_rows(x, batch.starts);
}

// Z_u at time t as a 1 × d row.
inline Matrix node_repr(const TemporalStore& store, NodeId node, double t, const ModelConfig& config,
                        const ModelParams& params) {
  Tape tape(false);
  const NodeQuery q{node, t};
  return encode_nodes(tape, store, std::span<const NodeQuery>(&q, 1), config, params).value();
}

// Pre-sigmoid scores z = ReLU([Z_u; Z_v]·K1 + b1)·K2 + b2, one per row.
inline Var link_logits(Var zu, Var zv, const PredictorParams& p) {
  Tape& tape = *zu.tape;
  const Var hidden = ad::relu(ad::add_row(ad::matmul(ad::concat_cols(zu, zv), tape.param(p.k1)), tape.param(p.b1)));
  return ad::add_row(ad::matmul(hidden, tape.param(p.k2)), tape.param(p.b2));
}

inline Var predict_link(Var zu, Var zv, const PredictorParams& p) { return ad::sigmoid(link_logits(zu, zv, p)); }

inline double predict_link(const Matrix& zu, const Matrix& zv, const PredictorParams& p) {
  Tape tape(false);
  return predict_link(tape.constant(zu), tape.constant(zv), p).value().item();
}

// −Σ log p⁺ − Σ log(1 − p⁻), probabilities clamped to [1e-12, 1 − 1e-12].
inline Var bce_loss(std::optional<Var> pos, std::optional<Var> neg) {
  if (!pos && !neg) throw ContractError("bce_loss: no probabilities");
  std::optional<Var> total;
  if (pos) total = ad::scale(ad::sum_all(ad::log_clamped(*pos)), -1.0);
  if (neg) {
    const Var part = ad::scale(ad::sum_all(ad::log_clamped(ad::one_minus(*neg))), -1.0);
    total = total ? ad::add(*total, part) : part;
  }
  return *total;
}

inline double bce_loss(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() && neg.empty()) throw ContractError("bce_loss: no probabilities");
  auto clamp = [](double p) { return std::clamp(p, ops::kLogClamp, 1.0 - ops::kLogClamp); };
  double loss = 0.0;
  for (double p : pos) loss -= std::log(clamp(p));
  for (double p : neg) loss -= std::log(clamp(1.0 - p));
  return loss;
}

// One positive and one negative per interaction, all scored at the
// interaction time.
struct LinkBatch {
  std::vector<NodeId> src;
  std::vector<NodeId> dst;
  std::vector<NodeId> neg;
  std::vector<double> t;

  std::size_t size() const noexcept { return src.size(); }
};

struct LinkScores {
  Var pos;  // B × 1 probabilities
  Var neg;  // B × 1 probabilities
};

inline LinkScores score_batch(Tape& tape, const TemporalStore& store, const LinkBatch& batch, const ModelConfig& config,
                              const ModelParams& params) {
  const std::size_t b = batch.size();
  if (b == 0) throw ContractError("score_batch: empty batch");
  std::vector<NodeQuery> queries;
  queries.reserve(3 * b);
  for (std::size_t i = 0; i < b; ++i) queries.push_back({batch.src[i], batch.t[i]});
  for (std::size_t i = 0; i < b; ++i) queries.push_back({batch.dst[i], batch.t[i]});
  for (std::size_t i = 0; i < b; ++i) queries.push_back({batch.neg[i], batch.t[i]});
  const Var z = encode_nodes(tape, store, queries, config, params);
  const Var zu = ad::slice_rows(z, 0, b);
  const Var zv = ad::slice_rows(z, b, b);
  const Var zn = ad::slice_rows(z, 2 * b, b);
  return {predict_link(zu, zv, params.predictor), predict_link(zu, zn, params.predictor)};
}

inline Var batch_loss(Tape& tape, const TemporalStore& store, const LinkBatch& batch, const ModelConfig& config,
                      const ModelParams& params) {
  const LinkScores s = score_batch(tape, store, batch, config, params);
  return bce_loss(s.pos, s.neg);
}

}  // namespace glformer
