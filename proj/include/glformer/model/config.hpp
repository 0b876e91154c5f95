#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "glformer/mixers/block.hpp"
#include "glformer/mixers/offsets.hpp"

namespace glformer {

struct ModelConfig {
  std::vector<std::size_t> schedule{2, 4};  // s¹ < … < s^L, one bound per layer
  std::size_t d = 32;
  std::size_t d_time = 100;
  std::size_t n_max = 32;  // neighbors sampled per query
  MixerKind mixer = MixerKind::Adaptive;
  Ablation ablation;

  std::size_t layers() const noexcept { return schedule.size(); }
  OffsetSchedule offsets() const { return OffsetSchedule(schedule); }

  void validate() const {
    const OffsetSchedule s(schedule);
    if (d == 0) throw ConfigError("model.d must be positive");
    if (n_max == 0) throw ConfigError("model.n_max must be positive");
    (void)ablation.fusion();
  }

  // Per-layer offsets and pooling windows (pooling averages K_l tokens).
  std::vector<LayerSpec> layer_specs() const {
    const OffsetSchedule s(schedule);
    std::vector<LayerSpec> specs;
    for (std::size_t l = 1; l <= s.layers(); ++l) {
      auto r = s.offsets(l);
      const std::size_t k = r.size();
      specs.push_back({std::move(r), k});
    }
    return specs;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json to_json(const Ablation& a) {
  return {{"no_lp", a.no_lp}, {"no_rt", a.no_rt}, {"relu", a.relu}, {"no_resnet", a.no_resnet}, {"no_cm", a.no_cm}};
}

inline Ablation ablation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("ablation must be a JSON object");
  Ablation a;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_boolean()) throw ConfigError("ablation key '" + key + "' must be a boolean");
    const bool v = value.get<bool>();
    if (key == "no_lp") {
      a.no_lp = v;
    } else if (key == "no_rt") {
      a.no_rt = v;
    } else if (key == "relu") {
      a.relu = v;
    } else if (key == "no_resnet") {
      a.no_resnet = v;
    } else if (key == "no_cm") {
      a.no_cm = v;
    } else {
      throw ConfigError("unknown ablation key '" + key + "'");
    }
  }
  return a;
}

// Named single-flag variants used by the ablation sweep.
inline const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{"full", "no_lp", "no_rt", "relu", "no_resnet", "no_cm"};
  return names;
}

inline Ablation ablation_variant(const std::string& name) {
  Ablation a;
  if (name == "full") return a;
  if (name == "no_lp") {
    a.no_lp = true;
  } else if (name == "no_rt") {
    a.no_rt = true;
  } else if (name == "relu") {
    a.relu = true;
  } else if (name == "no_resnet") {
    a.no_resnet = true;
  } else if (name == "no_cm") {
    a.no_cm = true;
  } else {
    throw ConfigError("unknown ablation variant '" + name + "'");
  }
  return a;
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.layers()}, {"schedule", c.schedule}, {"d", c.d},
          {"d_time", c.d_time},   {"n_max", c.n_max},       {"mixer", to_string(c.mixer)},
          {"ablation", to_json(c.ablation)}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  std::optional<std::size_t> layers;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "layers") {
        layers = value.get<std::size_t>();
      } else if (key == "schedule") {
        c.schedule = value.get<std::vector<std::size_t>>();
      } else if (key == "d") {
        c.d = value.get<std::size_t>();
      } else if (key == "d_time") {
        c.d_time = value.get<std::size_t>();
      } else if (key == "n_max") {
        c.n_max = value.get<std::size_t>();
      } else if (key == "mixer") {
        c.mixer = parse_mixer_kind(value.get<std::string>());
      } else if (key == "ablation") {
        c.ablation = ablation_from_json(value);
      } else {
        throw ConfigError("unknown model config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
  if (layers && *layers != c.schedule.size()) {
    throw ConfigError("model.layers = " + std::to_string(*layers) + " but schedule has " +
                      std::to_string(c.schedule.size()) + " entries");
  }
  c.validate();
  return c;
}

}  // namespace glformer
