#pragma once

#include <cmath>
#include <random>

#include "glformer/numcore/matrix.hpp"

namespace glformer {

// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  if (rows + cols == 0) return m;
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  for (double& v : m.data()) v = u(rng);
  return m;
}

}  // namespace glformer
