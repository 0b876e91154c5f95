#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "glformer/tgraph/event.hpp"

namespace glformer {

// The most recent interactions of one node before a query time, oldest first.
struct NeighborSequence {
  std::vector<NodeId> neighbor_ids;
  std::vector<double> times;
  std::vector<std::size_t> edge_ids;

  std::size_t size() const noexcept { return neighbor_ids.size(); }
  bool empty() const noexcept { return neighbor_ids.empty(); }

  friend bool operator==(const NeighborSequence&, const NeighborSequence&) = default;
};

// Per-node time-sorted undirected adjacency over a prefix of a stream.
// Immutable after construction.
class TemporalStore {
 public:
  struct Entry {
    double t;
    NodeId neighbor;
    std::size_t edge_id;
  };

  TemporalStore() = default;

  // Indexes events [0, limit) of `stream`; `stream` must outlive the store.
  explicit TemporalStore(const EventStream& stream, std::size_t limit = static_cast<std::size_t>(-1))
      : stream_(&stream), adjacency_(stream.node_count) {
    const std::size_t n = std::min(limit, stream.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Event& e = stream.events[i];
      adjacency_[e.src].push_back({e.t, e.dst, i});
      if (e.dst != e.src) adjacency_[e.dst].push_back({e.t, e.src, i});
    }
    indexed_ = n;
  }

  const EventStream& stream() const { return *stream_; }
  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t indexed_events() const noexcept { return indexed_; }

  // Up to `max_count` latest interactions of `node` strictly before `t`.
  // O(log deg + max_count).
  NeighborSequence recent_neighbors(NodeId node, double t, std::size_t max_count) const {
    if (node >= adjacency_.size()) throw ContractError("recent_neighbors: node id out of range");
    if (!(t >= 0.0)) throw ContractError("recent_neighbors: query time must be non-negative");
    const auto& adj = adjacency_[node];
    const auto end = std::lower_bound(adj.begin(), adj.end(), t, [](const Entry& e, double q) { return e.t < q; });
    const auto take = std::min<std::size_t>(max_count, static_cast<std::size_t>(end - adj.begin()));
    NeighborSequence seq;
    seq.neighbor_ids.reserve(take);
    seq.times.reserve(take);
    seq.edge_ids.reserve(take);
    for (auto it = end - static_cast<std::ptrdiff_t>(take); it != end; ++it) {
      seq.neighbor_ids.push_back(it->neighbor);
      seq.times.push_back(it->t);
      seq.edge_ids.push_back(it->edge_id);
    }
    return seq;
  }

 private:
  const EventStream* stream_ = nullptr;
  std::vector<std::vector<Entry>> adjacency_;
  std::size_t indexed_ = 0;
};

}  // namespace glformer
