#pragma once

#include <random>
#include <string>
#include <vector>

#include "glformer/encoders.hpp"
#include "glformer/mixers/block.hpp"
#include "glformer/model/config.hpp"

namespace glformer {

// Link predictor: sigmoid(ReLU([Z_u; Z_v]·K1 + b1)·K2 + b2).
struct PredictorParams {
  Matrix k1;  // 2d × d
  Matrix b1;  // 1 × d
  Matrix k2;  // d × 1
  Matrix b2;  // 1 × 1
};

struct NamedTensor {
  std::string name;
  Matrix* tensor;
};

struct ModelParams {
  EncoderParams encoder;
  std::vector<LayerParams> layers;
  PredictorParams predictor;

  // Every trainable tensor in a fixed order with a stable name.
  std::vector<NamedTensor> tensors() {
    std::vector<NamedTensor> out{{"encoder.node_proj", &encoder.node_proj},
                                 {"encoder.edge_proj", &encoder.edge_proj},
                                 {"encoder.time_proj", &encoder.time_proj}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      LayerParams& lp = layers[l];
      std::visit(
          [&](auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, AdaptiveMixerParams>) {
              out.push_back({pre + "order_logits", &p.order_logits});
              out.push_back({pre + "fusion_logit", &p.fusion_logit});
            } else if constexpr (std::is_same_v<P, MlpMixerParams>) {
              out.push_back({pre + "mlp.w1", &p.w1});
              out.push_back({pre + "mlp.b1", &p.b1});
              out.push_back({pre + "mlp.w2", &p.w2});
              out.push_back({pre + "mlp.b2", &p.b2});
            } else if constexpr (std::is_same_v<P, AttentionParams>) {
              out.push_back({pre + "attn.w_q", &p.w_q});
              out.push_back({pre + "attn.w_k", &p.w_k});
              out.push_back({pre + "attn.w_v", &p.w_v});
              out.push_back({pre + "attn.w_o", &p.w_o});
            }
          },
          lp.mixer);
      out.push_back({pre + "channel.ln_gain", &lp.channel.ln_gain});
      out.push_back({pre + "channel.ln_bias", &lp.channel.ln_bias});
      out.push_back({pre + "channel.w_ff1", &lp.channel.w_ff1});
      out.push_back({pre + "channel.b_ff1", &lp.channel.b_ff1});
      out.push_back({pre + "channel.w_ff2", &lp.channel.w_ff2});
      out.push_back({pre + "channel.b_ff2", &lp.channel.b_ff2});
    }
    out.push_back({"predictor.k1", &predictor.k1});
    out.push_back({"predictor.b1", &predictor.b1});
    out.push_back({"predictor.k2", &predictor.k2});
    out.push_back({"predictor.b2", &predictor.b2});
    return out;
  }

  std::vector<Matrix*> tensor_ptrs() {
    std::vector<Matrix*> out;
    for (auto& t : tensors()) out.push_back(t.tensor);
    return out;
  }
};

inline ModelParams init_model(const ModelConfig& config, std::size_t d_node, std::size_t d_edge,
                              std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.d;
  ModelParams p;
  p.encoder = init_encoder(d_node, d_edge, config.d_time, d, rng);
  for (const LayerSpec& spec : config.layer_specs()) {
    LayerParams lp;
    switch (config.mixer) {
      case MixerKind::Adaptive: lp.mixer = init_adaptive(spec.offsets.size()); break;
      case MixerKind::Pooling: lp.mixer = PoolingMixerParams{}; break;
      case MixerKind::Mlp: lp.mixer = init_mlp_mixer(config.n_max, rng); break;
      case MixerKind::Attention: lp.mixer = init_attention(d, rng); break;
    }
    lp.channel = init_channel_mixer(d, rng);
    p.layers.push_back(std::move(lp));
  }
  p.predictor = {glorot_uniform(2 * d, d, rng), Matrix(1, d), glorot_uniform(d, 1, rng), Matrix(1, 1)};
  return p;
}

// Effective fusion weight β per layer (NaN for non-adaptive mixers).
inline std::vector<double> layer_betas(const ModelParams& p, const ModelConfig& config) {
  std::vector<double> out;
  for (const LayerParams& lp : p.layers) {
    if (const auto* a = std::get_if<AdaptiveMixerParams>(&lp.mixer)) {
      out.push_back(effective_beta(*a, config.ablation.fusion()));
    } else {
      out.push_back(std::nan(""));
    }
  }
  return out;
}

}  // namespace glformer
