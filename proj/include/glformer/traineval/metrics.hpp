#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "glformer/errors.hpp"

namespace glformer {

namespace detail {

inline void check_metric_input(std::span<const double> scores, std::span<const int> labels, const char* who) {
  if (scores.size() != labels.size()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError(std::string(who) + ": labels must be 0 or 1");
    if (std::isnan(scores[i])) throw ContractError(std::string(who) + ": NaN score");
  }
}

}  // namespace detail

// Step-interpolated average precision. Items with tied scores form one
// threshold: AP = Σ_k (R_k − R_{k−1})·P_k over distinct scores, descending.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  detail::check_metric_input(scores, labels, "average_precision");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) throw MetricError("average_precision: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t tp = 0, seen = 0, tp_prev = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      tp += static_cast<std::size_t>(labels[order[i]]);
      ++seen;
    }
    if (tp != tp_prev) {
      const double recall_gain = static_cast<double>(tp - tp_prev) / static_cast<double>(positives);
      ap += recall_gain * (static_cast<double>(tp) / static_cast<double>(seen));
      tp_prev = tp;
    }
  }
  return ap;
}

// Mann–Whitney AUC: share of (positive, negative) pairs ordered correctly,
// ties counting one half.
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_metric_input(scores, labels, "auc_roc");
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw MetricError("auc_roc: needs both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann–Whitney U statistic, kept integral until the end.
  double twice_u = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::size_t pos_here = 0, neg_here = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? pos_here : neg_here)++;
    twice_u += static_cast<double>(pos_here) * static_cast<double>(2 * neg_below + neg_here);
    neg_below += neg_here;
  }
  return twice_u / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace glformer
