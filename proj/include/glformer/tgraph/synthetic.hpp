#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "glformer/tgraph/event.hpp"

namespace glformer {

enum class SyntheticPattern { UniformRandom, PeriodicRepeat };

enum class SyntheticFeatures {
  None,
  // Edge feature = one-hot(src) + one-hot(dst) over all nodes.
  Identity,
};

struct SyntheticSpec {
  std::size_t num_src = 10;
  std::size_t num_dst = 10;
  std::size_t num_events = 1000;
  SyntheticPattern pattern = SyntheticPattern::PeriodicRepeat;
  double p_repeat = 0.9;
  SyntheticFeatures features = SyntheticFeatures::Identity;
  // Gap between consecutive events is drawn uniformly from [1, max_gap].
  std::uint32_t max_gap = 3;
  std::uint64_t seed = 7;
};

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "num_src") {
        s.num_src = value.get<std::size_t>();
      } else if (key == "num_dst") {
        s.num_dst = value.get<std::size_t>();
      } else if (key == "num_events") {
        s.num_events = value.get<std::size_t>();
      } else if (key == "p_repeat") {
        s.p_repeat = value.get<double>();
      } else if (key == "max_gap") {
        s.max_gap = value.get<std::uint32_t>();
      } else if (key == "seed") {
        s.seed = value.get<std::uint64_t>();
      } else if (key == "pattern") {
        const auto p = value.get<std::string>();
        if (p == "uniform-random") {
          s.pattern = SyntheticPattern::UniformRandom;
        } else if (p == "periodic-repeat") {
          s.pattern = SyntheticPattern::PeriodicRepeat;
        } else {
          throw ConfigError("unknown synthetic pattern '" + p + "'");
        }
      } else if (key == "features") {
        const auto f = value.get<std::string>();
        if (f == "none") {
          s.features = SyntheticFeatures::None;
        } else if (f == "identity") {
          s.features = SyntheticFeatures::Identity;
        } else {
          throw ConfigError("unknown synthetic feature kind '" + f + "'");
        }
      } else {
        throw ConfigError("unknown synthetic spec key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("synthetic spec key '" + key + "': " + e.what());
    }
  }
  return s;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"num_src", s.num_src},
          {"num_dst", s.num_dst},
          {"num_events", s.num_events},
          {"pattern", s.pattern == SyntheticPattern::UniformRandom ? "uniform-random" : "periodic-repeat"},
          {"p_repeat", s.p_repeat},
          {"features", s.features == SyntheticFeatures::None ? "none" : "identity"},
          {"max_gap", s.max_gap},
          {"seed", s.seed}};
}

// Bipartite stream: sources are nodes [0, num_src), destinations follow.
// Each event picks a uniform source. Under PeriodicRepeat the source returns
// to its previous destination with probability p_repeat and otherwise moves
// to a uniformly chosen different destination; a source's first event is
// uniform.
inline EventStream generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_src == 0 || spec.num_dst == 0) throw ConfigError("synthetic spec needs at least one source and destination");
  if (!(spec.p_repeat >= 0.0 && spec.p_repeat <= 1.0)) throw ConfigError("p_repeat must lie in [0, 1]");
  if (spec.max_gap == 0) throw ConfigError("max_gap must be at least 1");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick_src(0, spec.num_src - 1);
  std::uniform_int_distribution<std::size_t> pick_dst(0, spec.num_dst - 1);
  std::uniform_int_distribution<std::uint32_t> pick_gap(1, spec.max_gap);
  std::bernoulli_distribution repeat(spec.p_repeat);

  EventStream s;
  s.node_count = spec.num_src + spec.num_dst;
  s.edge_feat_dim = spec.features == SyntheticFeatures::Identity ? s.node_count : 0;
  s.events.reserve(spec.num_events);

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> previous(spec.num_src, kNone);
  double t = 0.0;
  for (std::size_t k = 0; k < spec.num_events; ++k) {
    t += static_cast<double>(pick_gap(rng));
    const std::size_t u = pick_src(rng);
    std::size_t v = 0;
    if (spec.pattern == SyntheticPattern::UniformRandom || previous[u] == kNone) {
      v = pick_dst(rng);
    } else if (repeat(rng) || spec.num_dst == 1) {
      v = previous[u];
    } else {
      std::uniform_int_distribution<std::size_t> other(0, spec.num_dst - 2);
      v = other(rng);
      if (v >= previous[u]) ++v;
    }
    previous[u] = v;

    Event e;
    e.src = static_cast<NodeId>(u);
    e.dst = static_cast<NodeId>(spec.num_src + v);
    e.t = t;
    if (s.edge_feat_dim > 0) {
      e.edge_feat.assign(s.edge_feat_dim, 0.0);
      e.edge_feat[e.src] = 1.0;
      e.edge_feat[e.dst] = 1.0;
    }
    s.events.push_back(std::move(e));
  }
  finalize_stream(s);
  return s;
}

}  // namespace glformer
