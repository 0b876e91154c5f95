#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glformer/errors.hpp"
#include "glformer/numcore/matrix.hpp"

namespace glformer {

using NodeId = std::uint32_t;

// One timestamped interaction.
struct Event {
  NodeId src = 0;
  NodeId dst = 0;
  double t = 0.0;
  std::vector<double> edge_feat;
  std::optional<int> label;

  friend bool operator==(const Event&, const Event&) = default;
};

// Events ordered by non-decreasing timestamp, ties kept in source order.
struct EventStream {
  std::vector<Event> events;
  std::size_t node_count = 0;
  std::size_t node_feat_dim = 0;
  std::size_t edge_feat_dim = 0;
  // node_count × node_feat_dim; zeros when the source has no node features.
  Matrix node_feats;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// Sorts stably by timestamp and fills defaults derived from the events.
inline void finalize_stream(EventStream& s) {
  std::stable_sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  if (s.node_feats.rows() != s.node_count || s.node_feats.cols() != s.node_feat_dim) {
    s.node_feats = Matrix(s.node_count, s.node_feat_dim);
  }
}

inline void validate_stream(const EventStream& s) {
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event& e = s.events[i];
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) {
      throw ValidationError("event " + std::to_string(i) + ": timestamp must be finite and non-negative");
    }
    if (e.src >= s.node_count || e.dst >= s.node_count) {
      throw ValidationError("event " + std::to_string(i) + ": node id out of range");
    }
    if (e.edge_feat.size() != s.edge_feat_dim) {
      throw ValidationError("event " + std::to_string(i) + ": edge feature dimension " +
                            std::to_string(e.edge_feat.size()) + " != " + std::to_string(s.edge_feat_dim));
    }
    if (i > 0 && s.events[i - 1].t > e.t) {
      throw ValidationError("event " + std::to_string(i) + ": stream is not sorted by time");
    }
  }
}

// Destination partition when sources and destinations are disjoint (bipartite
// data), otherwise every node. Only the first `limit` events are inspected.
// Sorted ascending.
inline std::vector<NodeId> negative_candidates(const EventStream& s,
                                               std::size_t limit = static_cast<std::size_t>(-1)) {
  std::vector<char> is_src(s.node_count, 0);
  std::vector<char> is_dst(s.node_count, 0);
  const std::size_t seen = std::min(limit, s.events.size());
  for (std::size_t i = 0; i < seen; ++i) {
    const Event& e = s.events[i];
    is_src[e.src] = 1;
    is_dst[e.dst] = 1;
  }
  bool bipartite = true;
  for (std::size_t n = 0; n < s.node_count; ++n) {
    if (is_src[n] && is_dst[n]) {
      bipartite = false;
      break;
    }
  }
  std::vector<NodeId> out;
  for (std::size_t n = 0; n < s.node_count; ++n) {
    if (!bipartite || is_dst[n]) out.push_back(static_cast<NodeId>(n));
  }
  return out;
}

}  // namespace glformer
