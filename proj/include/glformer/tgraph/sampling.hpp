#pragma once

#include <algorithm>
#include <random>
#include <span>

#include "glformer/tgraph/event.hpp"

namespace glformer {

using Rng = std::mt19937_64;

// Uniform draw from `candidates` \ {true_dst}. `candidates` must be sorted
// ascending without duplicates. The source node does not restrict the draw.
inline NodeId sample_negative(Rng& rng, NodeId /*src*/, NodeId true_dst, std::span<const NodeId> candidates) {
  const auto hit = std::lower_bound(candidates.begin(), candidates.end(), true_dst);
  const bool excluded = hit != candidates.end() && *hit == true_dst;
  const std::size_t support = candidates.size() - (excluded ? 1 : 0);
  if (support == 0) throw SamplingError("sample_negative: no candidate other than the true destination");
  std::uniform_int_distribution<std::size_t> pick(0, support - 1);
  std::size_t k = pick(rng);
  if (excluded && k >= static_cast<std::size_t>(hit - candidates.begin())) ++k;
  return candidates[k];
}

}  // namespace glformer
