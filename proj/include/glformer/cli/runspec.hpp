#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glformer/model/config.hpp"
#include "glformer/tgraph/csv.hpp"
#include "glformer/tgraph/synthetic.hpp"
#include "glformer/traineval/config.hpp"

namespace glformer::cli {

struct BenchSpec {
  std::vector<std::size_t> lengths{256, 1024, 4096};
  std::vector<MixerKind> mixers{MixerKind::Adaptive, MixerKind::Pooling, MixerKind::Mlp, MixerKind::Attention};
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  std::size_t d = 32;
  // Offsets / window of this layer of the model schedule are used at every N.
  std::size_t layer = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (lengths.size() < 3) throw ConfigError("bench: need at least 3 sequence lengths to fit a slope");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      if (lengths[i] == 0) throw ConfigError("bench: lengths must be positive");
      if (i > 0 && lengths[i] <= lengths[i - 1]) throw ConfigError("bench: lengths must be strictly ascending");
    }
    if (mixers.empty()) throw ConfigError("bench: no mixers requested");
    if (repeats == 0) throw ConfigError("bench: repeats must be at least 1");
    if (d == 0) throw ConfigError("bench: d must be positive");
  }
};

// Exactly one of `dataset` / `synthetic` is set once a command needs data.
struct RunSpec {
  std::optional<std::filesystem::path> dataset;
  std::optional<SyntheticSpec> synthetic;
  IngestOptions ingest;
  ModelConfig model;
  TrainConfig train;
  std::size_t runs = 1;
  std::vector<std::string> variants = ablation_variants();
  BenchSpec bench;
  std::filesystem::path out = "out";

  void validate_data() const {
    if (dataset && synthetic) throw ConfigError("spec names both a dataset and a synthetic stream");
    if (!dataset && !synthetic) throw ConfigError("spec names no data source (set `dataset` or `synthetic`)");
  }

  void validate() const {
    model.validate();
    train.validate();
    if (runs == 0) throw ConfigError("runs must be at least 1");
    if (variants.empty()) throw ConfigError("no ablation variants requested");
    for (const auto& v : variants) ablation_variant(v);
    bench.validate();
  }
};

inline BenchSpec bench_spec_from_json(const nlohmann::json& j, BenchSpec b) {
  if (!j.is_object()) throw ConfigError("`bench` must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "lengths") {
        b.lengths = value.get<std::vector<std::size_t>>();
      } else if (key == "mixers") {
        b.mixers.clear();
        for (const auto& m : value) b.mixers.push_back(parse_mixer_kind(m.get<std::string>()));
      } else if (key == "repeats") {
        b.repeats = value.get<std::size_t>();
      } else if (key == "warmup") {
        b.warmup = value.get<std::size_t>();
      } else if (key == "d") {
        b.d = value.get<std::size_t>();
      } else if (key == "layer") {
        b.layer = value.get<std::size_t>();
      } else {
        throw ConfigError("unknown bench key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bench key '" + key + "': " + e.what());
    }
  }
  return b;
}

// Relative dataset paths resolve against the spec file's directory.
inline RunSpec run_spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  RunSpec s;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dataset") {
        std::filesystem::path p = value.get<std::string>();
        s.dataset = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      } else if (key == "synthetic") {
        s.synthetic = synthetic_spec_from_json(value);
      } else if (key == "bipartite_ids") {
        s.ingest.bipartite_ids = value.get<bool>();
      } else if (key == "model") {
        s.model = model_config_from_json(value);
      } else if (key == "train") {
        s.train = train_config_from_json(value);
      } else if (key == "runs") {
        s.runs = value.get<std::size_t>();
      } else if (key == "variants") {
        s.variants = value.get<std::vector<std::string>>();
      } else if (key == "bench") {
        s.bench = bench_spec_from_json(value, s.bench);
      } else if (key == "out") {
        s.out = value.get<std::string>();
      } else {
        throw ConfigError("unknown spec key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("spec key '" + key + "': " + e.what());
    }
  }
  return s;
}

inline RunSpec load_run_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return run_spec_from_json(j, path.parent_path());
}

inline nlohmann::json to_json(const RunSpec& s) {
  nlohmann::json j{{"model", to_json(s.model)}, {"train", to_json(s.train)}, {"runs", s.runs}};
  if (s.dataset) {
    j["dataset"] = s.dataset->generic_string();
    j["bipartite_ids"] = s.ingest.bipartite_ids;
  }
  if (s.synthetic) j["synthetic"] = to_json(*s.synthetic);
  return j;
}

inline EventStream load_stream(const RunSpec& s) {
  s.validate_data();
  if (s.dataset) return ingest_csv(*s.dataset, s.ingest);
  return generate_synthetic(*s.synthetic);
}

}  // namespace glformer::cli
