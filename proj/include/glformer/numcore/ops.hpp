#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "glformer/numcore/matrix.hpp"

// Value-level kernels. Every function is pure and deterministic; the tape in
// tape.hpp records these same kernels and adds their adjoints.
namespace glformer::ops {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kLogClamp = 1e-12;

// Each output element accumulates over k in ascending order, so the result
// does not depend on the row blocking.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + a.shape() + " x " + b.shape());
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  const std::size_t m = a.rows();
  const std::size_t kk = a.cols();
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict c0 = c.row(i).data();
    double* __restrict c1 = c.row(i + 1).data();
    double* __restrict c2 = c.row(i + 2).data();
    double* __restrict c3 = c.row(i + 3).data();
    for (std::size_t k = 0; k < kk; ++k) {
      const double a0 = a(i, k), a1 = a(i + 1, k), a2 = a(i + 2, k), a3 = a(i + 3, k);
      if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
      const double* __restrict brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = brow[j];
        c0[j] += a0 * bj;
        c1[j] += a1 * bj;
        c2[j] += a2 * bj;
        c3[j] += a3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    double* __restrict crow = c.row(i).data();
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* __restrict brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a);

// a · bᵀ, computed as a · (bᵀ) so the inner loop is a contiguous axpy.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ " + a.shape() + " x " + b.shape() + "^T");
  }
  return matmul(a, transpose(b));
}

// aᵀ · b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dimensions differ " + a.shape() + "^T x " + b.shape());
  }
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* crow = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

inline void add_into(Matrix& acc, const Matrix& b) {
  require_same_shape(acc, b, "add_into");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

inline Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (double& v : out.data()) v *= c;
  return out;
}

// c·a + shift, elementwise.
inline Matrix affine(const Matrix& a, double c, double shift) {
  Matrix out = a;
  for (double& v : out.data()) v = c * v + shift;
  return out;
}

// Adds a 1×cols bias to every row.
inline Matrix add_row(const Matrix& a, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row: bias " + bias.shape() + " does not broadcast over " + a.shape());
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto r = c.row(i);
    for (std::size_t j = 0; j < c.cols(); ++j) r[j] += bias[j];
  }
  return c;
}

// Adds a rows×1 bias to every column.
inline Matrix add_col(const Matrix& a, const Matrix& bias) {
  if (bias.cols() != 1 || bias.rows() != a.rows()) {
    throw DimensionError("add_col: bias " + bias.shape() + " does not broadcast over " + a.shape());
  }
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (double& v : c.row(i)) v += bias[i];
  return c;
}

inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ " + a.shape() + " vs " + b.shape());
  }
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), out.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), out.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return c;
}

inline Matrix softmax_rows(const Matrix& a) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    auto r = c.row(i);
    if (r.empty()) continue;
    const double m = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : r) v /= z;
  }
  return c;
}

// Per-row normalization with population variance; gain and bias are 1×cols.
inline Matrix layer_norm_rows(const Matrix& a, const Matrix& gain, const Matrix& bias,
                              double eps = kLayerNormEps) {
  if (gain.rows() != 1 || gain.cols() != a.cols() || !gain.same_shape(bias)) {
    throw DimensionError("layer_norm_rows: gain " + gain.shape() + " / bias " + bias.shape() +
                         " do not match input " + a.shape());
  }
  Matrix c(a.rows(), a.cols());
  const double n = static_cast<double>(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto x = a.row(i);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto y = c.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = (x[j] - mean) * inv * gain[j] + bias[j];
  }
  return c;
}

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix c = a;
  for (double& v : c.data()) v = f(v);
  return c;
}

inline Matrix gelu(const Matrix& a) { return map(a, gelu_scalar); }
inline Matrix relu(const Matrix& a) { return map(a, [](double v) { return v > 0.0 ? v : 0.0; }); }
inline Matrix sigmoid(const Matrix& a) { return map(a, sigmoid_scalar); }
inline Matrix exp_neg(const Matrix& a) { return map(a, [](double v) { return std::exp(-v); }); }

inline Matrix log_clamped(const Matrix& a) {
  return map(a, [](double v) { return std::log(std::clamp(v, kLogClamp, 1.0 - kLogClamp)); });
}

// Column-wise mean over rows: (r×c) -> (1×c).
inline Matrix mean_rows(const Matrix& a) {
  if (a.rows() == 0) throw DimensionError("mean_rows: no rows in " + a.shape());
  Matrix m(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) m[j] += r[j];
  }
  const double inv = 1.0 / static_cast<double>(a.rows());
  for (double& v : m.data()) v *= inv;
  return m;
}

// (r×c) -> (1×c)
inline Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += r[j];
  }
  return s;
}

// (r×c) -> (r×1)
inline Matrix row_sums(const Matrix& a) {
  Matrix s(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double v : a.row(i)) s[i] += v;
  return s;
}

inline double sum(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

inline bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace glformer::ops
