#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "glformer/errors.hpp"

namespace glformer {

// Per-layer offset bounds s¹ < s² < … < s^L. Layer 1 aggregates offsets
// {0, …, s¹−1}; layer l ≥ 2 aggregates the gapped range [s^{l−1}, s^l].
class OffsetSchedule {
 public:
  OffsetSchedule() = default;

  explicit OffsetSchedule(std::vector<std::size_t> bounds) : bounds_(std::move(bounds)) {
    if (bounds_.empty()) throw ConfigError("offset schedule needs at least one layer");
    if (bounds_[0] < 1) throw ConfigError("offset schedule: first bound must be >= 1");
    for (std::size_t i = 1; i < bounds_.size(); ++i) {
      if (bounds_[i] <= bounds_[i - 1]) throw ConfigError("offset schedule must be strictly increasing");
    }
  }

  std::size_t layers() const noexcept { return bounds_.size(); }
  const std::vector<std::size_t>& bounds() const noexcept { return bounds_; }

  // Ascending offset set R_l for 1-based layer l.
  std::vector<std::size_t> offsets(std::size_t layer) const {
    if (layer < 1 || layer > bounds_.size()) {
      throw IndexError("hierarchical_offsets: layer " + std::to_string(layer) + " outside 1.." +
                          std::to_string(bounds_.size()));
    }
    const std::size_t lo = layer == 1 ? 0 : bounds_[layer - 2];
    const std::size_t hi = layer == 1 ? bounds_[0] - 1 : bounds_[layer - 1];
    std::vector<std::size_t> r;
    for (std::size_t p = lo; p <= hi; ++p) r.push_back(p);
    return r;
  }

  // K_l = |R_l|.
  std::size_t kernel_size(std::size_t layer) const { return offsets(layer).size(); }

  // Largest offset reachable through the stack: (s¹−1) + s² + … + s^L.
  std::size_t max_lookback() const {
    std::size_t total = bounds_[0] - 1;
    for (std::size_t i = 1; i < bounds_.size(); ++i) total += bounds_[i];
    return total;
  }

 private:
  std::vector<std::size_t> bounds_;
};

inline std::vector<std::size_t> hierarchical_offsets(const OffsetSchedule& schedule, std::size_t layer) {
  return schedule.offsets(layer);
}

// Number of offsets p with p <= i, for every row i of an n-row sequence.
inline std::vector<std::size_t> valid_offset_counts(std::span<const std::size_t> offsets, std::size_t n) {
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    while (c < offsets.size() && offsets[c] <= i) ++c;
    counts[i] = c;
  }
  return counts;
}

// Row bounds of a stack of token sequences: segment b covers rows
// [starts[b], starts[b+1]).
inline std::vector<std::size_t> single_segment(std::size_t n) { return {0, n}; }

inline void check_segments(std::span<const std::size_t> starts, std::size_t n) {
  if (starts.size() < 2 || starts.front() != 0 || starts.back() != n) {
    throw DimensionError("segment bounds do not cover " + std::to_string(n) + " rows");
  }
  for (std::size_t b = 1; b < starts.size(); ++b) {
    if (starts[b] <= starts[b - 1]) throw DimensionError("empty token segment");
  }
}

// valid_offset_counts applied independently to each segment.
inline std::vector<std::size_t> segment_valid_counts(std::span<const std::size_t> offsets,
                                                     std::span<const std::size_t> starts) {
  std::vector<std::size_t> counts;
  counts.reserve(starts.back());
  for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
    const auto part = valid_offset_counts(offsets, starts[b + 1] - starts[b]);
    counts.insert(counts.end(), part.begin(), part.end());
  }
  return counts;
}

}  // namespace glformer
