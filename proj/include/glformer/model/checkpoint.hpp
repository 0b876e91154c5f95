#pragma once

#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "glformer/model/config.hpp"
#include "glformer/model/params.hpp"

namespace glformer {

inline constexpr const char* kCheckpointFormat = "glformer-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::size_t d_node = 0;
  std::size_t d_edge = 0;
  ModelParams params;
};

// Doubles are written in shortest round-trip form, so load(save(x)) == x
// bit for bit.
inline nlohmann::json checkpoint_to_json(const ModelConfig& config, std::size_t d_node, std::size_t d_edge,
                                         ModelParams& params) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, m] : params.tensors()) {
    tensors.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"data", m->values()}});
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(config)},
          {"input_dims", {{"node", d_node}, {"edge", d_edge}}},
          {"tensors", std::move(tensors)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw ConfigError("not a glformer checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.config = model_config_from_json(j.at("config"));
    c.d_node = j.at("input_dims").at("node").get<std::size_t>();
    c.d_edge = j.at("input_dims").at("edge").get<std::size_t>();
    std::mt19937_64 rng(0);
    c.params = init_model(c.config, c.d_node, c.d_edge, rng);
    const auto& stored = j.at("tensors");
    auto slots = c.params.tensors();
    if (stored.size() != slots.size()) {
      throw ConfigError("checkpoint holds " + std::to_string(stored.size()) + " tensors, model needs " +
                        std::to_string(slots.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& t = stored[i];
      const auto name = t.at("name").get<std::string>();
      if (name != slots[i].name) throw ConfigError("checkpoint tensor " + name + " where " + slots[i].name + " expected");
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      if (rows != slots[i].tensor->rows() || cols != slots[i].tensor->cols()) {
        throw ConfigError("checkpoint tensor " + name + " has shape (" + std::to_string(rows) + "x" +
                          std::to_string(cols) + "), model expects " + slots[i].tensor->shape());
      }
      *slots[i].tensor = Matrix(rows, cols, t.at("data").get<std::vector<double>>());
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const ModelConfig& config, std::size_t d_node,
                            std::size_t d_edge, ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << checkpoint_to_json(config, d_node, d_edge, params).dump() << '\n';
  if (!out) throw Error("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace glformer
