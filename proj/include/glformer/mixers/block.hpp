#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "glformer/mixers/adaptive.hpp"
#include "glformer/mixers/baselines.hpp"

namespace glformer {

enum class MixerKind { Adaptive, Pooling, Mlp, Attention };

inline std::string to_string(MixerKind k) {
  switch (k) {
    case MixerKind::Adaptive: return "adaptive";
    case MixerKind::Pooling: return "pooling";
    case MixerKind::Mlp: return "mlp";
    case MixerKind::Attention: return "attention";
  }
  return "?";
}

inline MixerKind parse_mixer_kind(const std::string& s) {
  if (s == "adaptive") return MixerKind::Adaptive;
  if (s == "pooling") return MixerKind::Pooling;
  if (s == "mlp") return MixerKind::Mlp;
  if (s == "attention") return MixerKind::Attention;
  throw ConfigError("unknown mixer kind '" + s + "'");
}

// Architecture switches exercised by the ablation study.
struct Ablation {
  bool no_lp = false;      // β pinned to 0 (time factor only)
  bool no_rt = false;      // β pinned to 1 (order weights only)
  bool relu = false;       // ReLU instead of GELU in the channel mixer
  bool no_resnet = false;  // drop both residual connections
  bool no_cm = false;      // drop the channel mixer

  FusionMode fusion() const {
    if (no_lp && no_rt) throw ConfigError("no_lp and no_rt cannot both be set");
    if (no_lp) return FusionMode::TimeOnly;
    if (no_rt) return FusionMode::OrderOnly;
    return FusionMode::Learned;
  }
  Activation activation() const { return relu ? Activation::Relu : Activation::Gelu; }

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

// ---------------------------------------------------------- channel mixer --

inline constexpr std::size_t kFfnExpansion = 4;

struct ChannelMixerParams {
  Matrix ln_gain;  // 1 × d
  Matrix ln_bias;  // 1 × d
  Matrix w_ff1;    // d × 4d
  Matrix b_ff1;    // 1 × 4d
  Matrix w_ff2;    // 4d × d
  Matrix b_ff2;    // 1 × d
};

inline ChannelMixerParams init_channel_mixer(std::size_t d, std::mt19937_64& rng) {
  const std::size_t hidden = kFfnExpansion * d;
  return {Matrix(1, d, 1.0), Matrix(1, d, 0.0), glorot_uniform(d, hidden, rng), Matrix(1, hidden, 0.0),
          glorot_uniform(hidden, d, rng), Matrix(1, d, 0.0)};
}

// H + FFN(LN(H)), with the residual optional.
inline Var channel_mix(Var h, const ChannelMixerParams& p, Activation act, bool residual = true) {
  Tape& tape = *h.tape;
  const Var normed = ad::layer_norm_rows(h, tape.param(p.ln_gain), tape.param(p.ln_bias));
  const Var hidden = activate(ad::add_row(ad::matmul(normed, tape.param(p.w_ff1)), tape.param(p.b_ff1)), act);
  const Var ffn = ad::add_row(ad::matmul(hidden, tape.param(p.w_ff2)), tape.param(p.b_ff2));
  return residual ? ad::add(h, ffn) : ffn;
}

inline Matrix channel_mix(const Matrix& h, const ChannelMixerParams& p, Activation act, bool residual = true) {
  Tape tape;
  return channel_mix(tape.constant(h), p, act, residual).value();
}

// ------------------------------------------------------------ token block --

using MixerParams = std::variant<AdaptiveMixerParams, PoolingMixerParams, MlpMixerParams, AttentionParams>;

inline MixerKind kind_of(const MixerParams& p) { return static_cast<MixerKind>(p.index()); }

struct LayerParams {
  MixerParams mixer;
  ChannelMixerParams channel;
};

// Static description of one layer: its offset set R_l (adaptive mixer) and
// pooling window.
struct LayerSpec {
  std::vector<std::size_t> offsets;
  std::size_t pool_window = 1;
};

inline Var token_mix(Var h, std::span<const double> times, const LayerSpec& spec, const MixerParams& params,
                     const Ablation& ablation, std::span<const std::size_t> starts) {
  return std::visit(
      [&](const auto& p) -> Var {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, AdaptiveMixerParams>) {
          return adaptive_mix(h, times, spec.offsets, p, ablation.fusion(), starts);
        } else if constexpr (std::is_same_v<P, PoolingMixerParams>) {
          return pooling_mix(h, spec.pool_window, starts);
        } else if constexpr (std::is_same_v<P, MlpMixerParams>) {
          return mlp_mix(h, p, ablation.activation(), starts);
        } else {
          return attention_mix(h, p, starts);
        }
      },
      params);
}

// Ĥ = H + mix(H); output = Ĥ + FFN(LN(Ĥ)). `no_resnet` drops both residual
// terms and `no_cm` returns Ĥ directly.
inline Var token_block(Var h, std::span<const double> times, const LayerSpec& spec, const LayerParams& params,
                       const Ablation& ablation, std::span<const std::size_t> starts) {
  const Var mixed = token_mix(h, times, spec, params.mixer, ablation, starts);
  const Var hat = ablation.no_resnet ? mixed : ad::add(h, mixed);
  if (ablation.no_cm) return hat;
  return channel_mix(hat, params.channel, ablation.activation(), !ablation.no_resnet);
}

inline Var token_block(Var h, std::span<const double> times, const LayerSpec& spec, const LayerParams& params,
                       const Ablation& ablation) {
  return token_block(h, times, spec, params, ablation, single_segment(h.rows()));
}

inline Matrix token_block(const Matrix& h, std::span<const double> times, const LayerSpec& spec,
                          const LayerParams& params, const Ablation& ablation) {
  Tape tape;
  return token_block(tape.constant(h), times, spec, params, ablation).value();
}

}  // namespace glformer
