#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "glformer/errors.hpp"

namespace glformer {

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-4;
  std::size_t batch_size = 200;
  // Stop once this many epochs pass without a better validation AP.
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  double train_ratio = 0.7;
  double val_ratio = 0.15;

  void validate() const {
    if (epochs == 0) throw ConfigError("train.epochs must be positive");
    if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
    if (!(train_ratio > 0.0) || !(val_ratio > 0.0) || !(train_ratio + val_ratio < 1.0)) {
      throw ConfigError("train ratios need train_ratio > 0, val_ratio > 0 and train_ratio + val_ratio < 1");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"lr", c.lr},
          {"batch_size", c.batch_size}, {"patience", c.patience},
          {"seed", c.seed},             {"train_ratio", c.train_ratio},
          {"val_ratio", c.val_ratio}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "epochs") {
        c.epochs = value.get<std::size_t>();
      } else if (key == "lr") {
        c.lr = value.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "patience") {
        c.patience = value.get<std::size_t>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "train_ratio") {
        c.train_ratio = value.get<double>();
      } else if (key == "val_ratio") {
        c.val_ratio = value.get<double>();
      } else {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("train config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

}  // namespace glformer
