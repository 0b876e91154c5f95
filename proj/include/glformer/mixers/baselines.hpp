#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "glformer/mixers/offsets.hpp"
#include "glformer/numcore/autodiff.hpp"
#include "glformer/numcore/init.hpp"

namespace glformer {

enum class Activation { Gelu, Relu };

inline Var activate(Var x, Activation act) { return act == Activation::Relu ? ad::relu(x) : ad::gelu(x); }

// ---------------------------------------------------------------- pooling --

struct PoolingMixerParams {};

// Row j = mean of rows max(0, j−window+1) … j, within each segment.
inline Var pooling_mix(Var h, std::size_t window, std::span<const std::size_t> starts) {
  if (window < 1) throw ContractError("pooling_mix: window must be >= 1");
  check_segments(starts, h.rows());
  Tape& tape = *h.tape;
  const std::size_t n = h.rows();
  std::vector<std::size_t> offsets(window);
  for (std::size_t p = 0; p < window; ++p) offsets[p] = p;
  const auto valid = segment_valid_counts(offsets, starts);
  Matrix weights(n, window);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < valid[i]; ++k) weights(i, k) = 1.0 / static_cast<double>(valid[i]);
  }
  tape.add_ops(n);
  return ad::banded_mix(h, tape.constant(std::move(weights)), offsets, valid);
}

inline Var pooling_mix(Var h, std::size_t window) { return pooling_mix(h, window, single_segment(h.rows())); }

inline Matrix pooling_mix(const Matrix& h, std::size_t window) {
  Tape tape;
  return pooling_mix(tape.constant(h), window).value();
}

// -------------------------------------------------------------------- MLP --

inline constexpr double kMlpTokenScale = 0.5;

inline std::size_t mlp_hidden_tokens(std::size_t tokens, double gamma = kMlpTokenScale) {
  return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(tokens)));
}

// Mixes along the token axis: H_out = W2·σ(W1·H + b1) + b2. The weights are
// tied to a fixed token count.
struct MlpMixerParams {
  Matrix w1;  // hidden × N
  Matrix b1;  // hidden × 1
  Matrix w2;  // N × hidden
  Matrix b2;  // N × 1

  std::size_t tokens() const { return w1.cols(); }
};

inline MlpMixerParams init_mlp_mixer(std::size_t tokens, std::mt19937_64& rng, double gamma = kMlpTokenScale) {
  const std::size_t hidden = mlp_hidden_tokens(tokens, gamma);
  return {glorot_uniform(hidden, tokens, rng), Matrix(hidden, 1), glorot_uniform(tokens, hidden, rng),
          Matrix(tokens, 1)};
}

inline Var mlp_mix(Var h, const MlpMixerParams& p, Activation act) {
  if (h.rows() != p.tokens()) {
    throw ConfigError("mlp_mix: parameters built for " + std::to_string(p.tokens()) + " tokens, got " +
                      std::to_string(h.rows()));
  }
  Tape& tape = *h.tape;
  const Var hidden = activate(ad::add_col(ad::matmul(tape.param(p.w1), h), tape.param(p.b1)), act);
  return ad::add_col(ad::matmul(tape.param(p.w2), hidden), tape.param(p.b2));
}

// Every segment must hold exactly p.tokens() rows.
inline Var mlp_mix(Var h, const MlpMixerParams& p, Activation act, std::span<const std::size_t> starts) {
  check_segments(starts, h.rows());
  if (starts.size() == 2) return mlp_mix(h, p, act);
  std::vector<Var> parts;
  parts.reserve(starts.size() - 1);
  for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
    parts.push_back(mlp_mix(ad::slice_rows(h, starts[b], starts[b + 1] - starts[b]), p, act));
  }
  return ad::stack_rows(parts);
}

inline Matrix mlp_mix(const Matrix& h, const MlpMixerParams& p, Activation act) {
  Tape tape;
  return mlp_mix(tape.constant(h), p, act).value();
}

// -------------------------------------------------------------- attention --

// Single-head scaled dot-product attention followed by the output projection.
struct AttentionParams {
  Matrix w_q;  // d × d_k
  Matrix w_k;  // d × d_k
  Matrix w_v;  // d × d_v
  Matrix w_o;  // d_v × d
};

inline AttentionParams init_attention(std::size_t d, std::mt19937_64& rng) {
  return {glorot_uniform(d, d, rng), glorot_uniform(d, d, rng), glorot_uniform(d, d, rng), glorot_uniform(d, d, rng)};
}

inline void check_attention(const Matrix& h, const AttentionParams& p) {
  if (p.w_q.rows() != h.cols() || p.w_k.rows() != h.cols() || p.w_q.cols() != p.w_k.cols() ||
      p.w_v.rows() != h.cols() || p.w_o.rows() != p.w_v.cols() || p.w_o.cols() != h.cols()) {
    throw DimensionError("attention: projections W_Q " + p.w_q.shape() + ", W_K " + p.w_k.shape() + ", W_V " +
                         p.w_v.shape() + ", W_O " + p.w_o.shape() + " do not fit tokens " + h.shape());
  }
}

// Row-stochastic score matrix softmax(Q·Kᵀ/√d_k), no causal mask.
inline Var attention_scores(Var h, const AttentionParams& p) {
  check_attention(h.value(), p);
  Tape& tape = *h.tape;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.w_q.cols()));
  const Var q = ad::scale(ad::matmul(h, tape.param(p.w_q)), inv_sqrt_dk);
  const Var k = ad::matmul(h, tape.param(p.w_k));
  return ad::softmax_rows(ad::matmul_nt(q, k));
}

// Scores are computed within each segment only.
inline Var attention_mix(Var h, const AttentionParams& p, std::span<const std::size_t> starts) {
  check_attention(h.value(), p);
  check_segments(starts, h.rows());
  Tape& tape = *h.tape;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.w_q.cols()));
  const Var q = ad::scale(ad::matmul(h, tape.param(p.w_q)), inv_sqrt_dk);
  const Var k = ad::matmul(h, tape.param(p.w_k));
  const Var v = ad::matmul(h, tape.param(p.w_v));
  Var mixed;
  if (starts.size() == 2) {
    mixed = ad::matmul(ad::softmax_rows(ad::matmul_nt(q, k)), v);
  } else {
    std::vector<Var> parts;
    parts.reserve(starts.size() - 1);
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
      const std::size_t len = starts[b + 1] - starts[b];
      const Var qs = ad::slice_rows(q, starts[b], len);
      const Var ks = ad::slice_rows(k, starts[b], len);
      const Var vs = ad::slice_rows(v, starts[b], len);
      parts.push_back(ad::matmul(ad::softmax_rows(ad::matmul_nt(qs, ks)), vs));
    }
    mixed = ad::stack_rows(parts);
  }
  return ad::matmul(mixed, tape.param(p.w_o));
}

inline Var attention_mix(Var h, const AttentionParams& p) { return attention_mix(h, p, single_segment(h.rows())); }

inline Matrix attention_mix(const Matrix& h, const AttentionParams& p) {
  Tape tape;
  return attention_mix(tape.constant(h), p).value();
}

}  // namespace glformer
