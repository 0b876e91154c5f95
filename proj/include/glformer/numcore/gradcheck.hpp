#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glformer/numcore/tape.hpp"

namespace glformer {

// Builds a scalar objective on `tape` from externally owned parameters.
// Parameters must be bound with tape.param() so the checker can perturb them
// in place.
using Objective = std::function<Var(Tape& tape)>;

struct GradCheckEntry {
  std::size_t param = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  const GradCheckEntry* worst() const {
    if (entries.empty()) return nullptr;
    return &*std::max_element(entries.begin(), entries.end(),
                              [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
  }
};

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // near-zero gradients from turning rounding noise into large ratios.
  double floor = 1e-6;
};

inline double evaluate_objective(const Objective& f) {
  Tape tape;
  return f(tape).value().item();
}

// Compares reverse-mode gradients against central finite differences for
// every entry of every parameter.
inline GradCheckReport grad_check(const Objective& f, std::span<Matrix* const> params,
                                  const GradCheckOptions& opt = {}) {
  if (!(opt.h > 0.0)) throw ContractError("grad_check: step h must be positive");

  const double base1 = evaluate_objective(f);
  const double base2 = evaluate_objective(f);
  if (base1 != base2) {
    throw OracleError("grad_check: objective is not deterministic (" + std::to_string(base1) + " vs " +
                      std::to_string(base2) + ")");
  }

  std::vector<Matrix> analytic;
  {
    Tape tape;
    const Var loss = f(tape);
    const Gradients grads = tape.backward(loss);
    for (const Matrix* p : params) analytic.push_back(grads.of(*p));
  }

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& p = *params[pi];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double orig = p[k];
      p[k] = orig + opt.h;
      const double up = evaluate_objective(f);
      p[k] = orig - opt.h;
      const double down = evaluate_objective(f);
      p[k] = orig;
      const double numeric = (up - down) / (2.0 * opt.h);
      const double a = analytic[pi][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const double rel = std::abs(a - numeric) / denom;
      report.entries.push_back({pi, k, a, numeric, rel});
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace glformer
