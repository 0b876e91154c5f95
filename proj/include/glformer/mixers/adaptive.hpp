#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "glformer/mixers/offsets.hpp"
#include "glformer/numcore/autodiff.hpp"

namespace glformer {

// How the order weights and the time weights are fused.
enum class FusionMode {
  Learned,    // β = sigmoid(raw fusion logit)
  TimeOnly,   // β pinned to 0
  OrderOnly,  // β pinned to 1
};

struct AdaptiveMixerParams {
  Matrix order_logits;  // 1 × K_l, one raw weight per offset
  Matrix fusion_logit;  // 1 × 1, β = sigmoid(value)
};

inline AdaptiveMixerParams init_adaptive(std::size_t kernel_size) {
  return {Matrix(1, kernel_size, 0.0), Matrix(1, 1, 0.0)};
}

inline double effective_beta(const AdaptiveMixerParams& p, FusionMode mode) {
  switch (mode) {
    case FusionMode::TimeOnly: return 0.0;
    case FusionMode::OrderOnly: return 1.0;
    case FusionMode::Learned: break;
  }
  return ops::sigmoid_scalar(p.fusion_logit.item());
}

// Time factor θ: for each row i, softmax over valid offsets p of
// -(t_i - t_{i-p}); zero in columns beyond the valid prefix.
inline Matrix time_weights(std::span<const double> times, std::span<const std::size_t> offsets,
                           std::span<const std::size_t> valid) {
  Matrix theta(times.size(), offsets.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t c = valid[i];
    if (c == 0) continue;
    auto r = theta.row(i);
    // Offsets ascend and times are non-decreasing, so the smallest gap (the
    // softmax maximum) sits at k = 0.
    const double shift = -(times[i] - times[i - offsets[0]]);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      r[k] = std::exp(-(times[i] - times[i - offsets[k]]) - shift);
      z += r[k];
    }
    for (std::size_t k = 0; k < c; ++k) r[k] /= z;
  }
  return theta;
}

inline void check_times(std::span<const double> times, std::size_t rows, std::span<const std::size_t> starts) {
  if (times.size() != rows) {
    throw DimensionError("token mixer: " + std::to_string(times.size()) + " timestamps for " +
                         std::to_string(rows) + " tokens");
  }
  check_segments(starts, rows);
  for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
    for (std::size_t i = starts[b] + 1; i < starts[b + 1]; ++i) {
      if (times[i] < times[i - 1]) throw ContractError("token mixer: timestamps must be non-decreasing");
    }
  }
}

// Mixing scores α (rows × K_l): α = β·softmax(w over valid offsets) + (1−β)·θ.
// Rows with no valid offset are all zero.
inline Var adaptive_weights(Tape& tape, std::span<const double> times, std::span<const std::size_t> offsets,
                            std::span<const std::size_t> valid, const AdaptiveMixerParams& params, FusionMode mode) {
  if (params.order_logits.rows() != 1 || params.order_logits.cols() != offsets.size()) {
    throw ConfigError("adaptive mixer: " + params.order_logits.shape() + " order weights for " +
                      std::to_string(offsets.size()) + " offsets");
  }
  Matrix theta = time_weights(times, offsets, valid);
  std::uint64_t theta_ops = 0;
  for (std::size_t c : valid) theta_ops += c;
  tape.add_ops(theta_ops);

  const Var time_part = tape.constant(std::move(theta));
  if (mode == FusionMode::TimeOnly) return time_part;
  const Var order_part = ad::masked_softmax_prefix(tape.param(params.order_logits), valid);
  if (mode == FusionMode::OrderOnly) return order_part;
  const Var beta = ad::sigmoid(tape.param(params.fusion_logit));
  return ad::add(ad::mul_scalar(order_part, beta), ad::mul_scalar(time_part, ad::one_minus(beta)));
}

inline Var adaptive_weights(Tape& tape, std::span<const double> times, std::span<const std::size_t> offsets,
                            const AdaptiveMixerParams& params, FusionMode mode) {
  const auto valid = valid_offset_counts(offsets, times.size());
  return adaptive_weights(tape, times, offsets, valid, params, mode);
}

// Row i = Σ_{p ∈ R, i−p ≥ 0} α_p^i · H[i−p]; rows without a valid offset are
// copied unchanged. Work is O(rows · K · d). With `starts`, each segment is
// an independent sequence and offsets never cross segment bounds.
inline Var adaptive_mix(Var h, std::span<const double> times, std::span<const std::size_t> offsets,
                        const AdaptiveMixerParams& params, FusionMode mode, std::span<const std::size_t> starts) {
  if (h.rows() == 0) throw ContractError("adaptive_mix: empty token matrix");
  check_times(times, h.rows(), starts);
  Tape& tape = *h.tape;
  const auto valid = segment_valid_counts(offsets, starts);
  const Var alpha = adaptive_weights(tape, times, offsets, valid, params, mode);
  return ad::banded_mix(h, alpha, offsets, valid);
}

inline Var adaptive_mix(Var h, std::span<const double> times, std::span<const std::size_t> offsets,
                        const AdaptiveMixerParams& params, FusionMode mode) {
  if (h.rows() == 0) throw ContractError("adaptive_mix: empty token matrix");
  return adaptive_mix(h, times, offsets, params, mode, single_segment(h.rows()));
}

inline Matrix adaptive_mix(const Matrix& h, std::span<const double> times, std::span<const std::size_t> offsets,
                           const AdaptiveMixerParams& params, FusionMode mode) {
  Tape tape;
  return adaptive_mix(tape.constant(h), times, offsets, params, mode).value();
}

}  // namespace glformer
