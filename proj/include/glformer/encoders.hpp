#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "glformer/numcore/autodiff.hpp"
#include "glformer/numcore/init.hpp"
#include "glformer/tgraph/event.hpp"
#include "glformer/tgraph/store.hpp"

namespace glformer {

// Geometric frequencies ω_k = 10^(-4k/d_T), k = 0..d_T-1.
inline std::vector<double> time_frequencies(std::size_t d_time) {
  std::vector<double> w(d_time);
  for (std::size_t k = 0; k < d_time; ++k) {
    w[k] = std::pow(10.0, -4.0 * static_cast<double>(k) / static_cast<double>(d_time));
  }
  return w;
}

// Fixed cosine bank: entry k = cos(ω_k · Δt).
inline std::vector<double> time_encode(double dt, std::span<const double> frequencies) {
  if (!(dt >= 0.0)) throw ContractError("time_encode: time difference must be non-negative");
  std::vector<double> out(frequencies.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::cos(frequencies[k] * dt);
  return out;
}

inline std::vector<double> time_encode(double dt, std::size_t d_time) {
  return time_encode(dt, time_frequencies(d_time));
}

// Projections of node features, edge features and time encodings into the
// model dimension. Row-vector convention: token = x · W.
struct EncoderParams {
  Matrix node_proj;  // d_N × d
  Matrix edge_proj;  // d_E × d
  Matrix time_proj;  // d_T × d
  std::vector<double> frequencies;

  std::size_t model_dim() const { return time_proj.cols(); }
};

inline EncoderParams init_encoder(std::size_t d_node, std::size_t d_edge, std::size_t d_time, std::size_t d,
                                  std::mt19937_64& rng) {
  EncoderParams p;
  p.node_proj = glorot_uniform(d_node, d, rng);
  p.edge_proj = glorot_uniform(d_edge, d, rng);
  p.time_proj = glorot_uniform(d_time, d, rng);
  p.frequencies = time_frequencies(d_time);
  return p;
}

inline void check_encoder(const EncoderParams& params, const EventStream& stream) {
  const std::size_t d = params.model_dim();
  if (params.node_proj.rows() != stream.node_feat_dim || params.edge_proj.rows() != stream.edge_feat_dim ||
      params.node_proj.cols() != d || params.edge_proj.cols() != d ||
      params.frequencies.size() != params.time_proj.rows()) {
    throw ConfigError("embed_neighbors: encoder shapes " + params.node_proj.shape() + "/" + params.edge_proj.shape() +
                      "/" + params.time_proj.shape() + " do not match stream feature dims (" +
                      std::to_string(stream.node_feat_dim) + ", " + std::to_string(stream.edge_feat_dim) + ")");
  }
}

// Token matrices of several sequences stacked vertically.
struct TokenBatch {
  Var tokens;
  // Per-row timestamps; padding rows carry the first real time (or t_ref).
  std::vector<double> times;
  // Segment b covers rows [starts[b], starts[b+1]).
  std::vector<std::size_t> starts;
  // Per segment: true when the node had no history.
  std::vector<bool> padded;
};

// Embeds every sequence against its own reference time. A sequence with no
// history becomes one all-zero row; with pad_to > 0 every segment is
// left-padded with zero rows to exactly pad_to rows.
inline TokenBatch embed_batch(Tape& tape, std::span<const NeighborSequence> seqs, std::span<const double> t_refs,
                              const EventStream& stream, const EncoderParams& params, std::size_t pad_to = 0) {
  check_encoder(params, stream);
  if (seqs.size() != t_refs.size()) throw DimensionError("embed_batch: one reference time per sequence required");
  if (seqs.empty()) throw ContractError("embed_batch: no sequences");
  const std::size_t d = params.model_dim();

  TokenBatch out;
  out.starts.push_back(0);
  for (const auto& seq : seqs) {
    if (pad_to > 0 && seq.size() > pad_to) throw ContractError("embed_batch: sequence longer than pad length");
    const std::size_t rows = pad_to > 0 ? pad_to : std::max<std::size_t>(1, seq.size());
    out.starts.push_back(out.starts.back() + rows);
    out.padded.push_back(seq.empty());
  }
  const std::size_t total = out.starts.back();
  out.times.resize(total);

  Matrix node_x(total, stream.node_feat_dim);
  Matrix edge_x(total, stream.edge_feat_dim);
  Matrix time_x(total, params.frequencies.size());
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const NeighborSequence& seq = seqs[b];
    const double t_ref = t_refs[b];
    const std::size_t first = out.starts[b + 1] - seq.size();
    const double pad_time = seq.empty() ? t_ref : seq.times.front();
    for (std::size_t r = out.starts[b]; r < first; ++r) out.times[r] = pad_time;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::size_t r = first + i;
      if (seq.times[i] > t_ref) throw ContractError("embed_neighbors: neighbor time after reference time");
      out.times[r] = seq.times[i];
      if (stream.node_feat_dim > 0) {
        auto src = stream.node_feats.row(seq.neighbor_ids[i]);
        std::copy(src.begin(), src.end(), node_x.row(r).begin());
      }
      if (stream.edge_feat_dim > 0) {
        const auto& f = stream.events[seq.edge_ids[i]].edge_feat;
        std::copy(f.begin(), f.end(), edge_x.row(r).begin());
      }
      if (!params.frequencies.empty()) {
        const auto enc = time_encode(t_ref - seq.times[i], params.frequencies);
        std::copy(enc.begin(), enc.end(), time_x.row(r).begin());
      }
    }
  }

  std::optional<Var> acc;
  auto accumulate = [&](Var term) { acc = acc ? ad::add(*acc, term) : term; };
  if (stream.node_feat_dim > 0) accumulate(ad::matmul(tape.constant(std::move(node_x)), tape.param(params.node_proj)));
  if (stream.edge_feat_dim > 0) accumulate(ad::matmul(tape.constant(std::move(edge_x)), tape.param(params.edge_proj)));
  if (!params.frequencies.empty()) {
    accumulate(ad::matmul(tape.constant(std::move(time_x)), tape.param(params.time_proj)));
  }
  out.tokens = acc ? *acc : tape.constant(Matrix(total, d));
  return out;
}

struct TokenMatrix {
  Var tokens;
  // Per-row timestamps (oldest first); the padding row carries t_ref.
  std::vector<double> times;
  // True when the node had no history and `tokens` is one zero row.
  bool padded = false;
};

// Token matrix for one neighbor sequence: row i is
//   nodefeat(id_i)·W_n + edgefeat(edge_i)·W_e + cos(ω·(t_ref - t_i))·W_t.
// A node without history yields a single all-zero padding row.
inline TokenMatrix embed_neighbors(Tape& tape, const NeighborSequence& seq, double t_ref, const EventStream& stream,
                                   const EncoderParams& params) {
  TokenBatch b = embed_batch(tape, std::span<const NeighborSequence>(&seq, 1), std::span<const double>(&t_ref, 1),
                             stream, params);
  return {b.tokens, std::move(b.times), b.padded[0]};
}

inline Matrix embed_neighbors(const NeighborSequence& seq, double t_ref, const EventStream& stream,
                              const EncoderParams& params) {
  Tape tape;
  return embed_neighbors(tape, seq, t_ref, stream, params).tokens.value();
}

}  // namespace glformer
