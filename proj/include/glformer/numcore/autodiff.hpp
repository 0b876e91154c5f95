#pragma once

#include <span>
#include <vector>

#include "glformer/numcore/tape.hpp"

// Differentiable primitives. Each records the forward kernel from ops.hpp
// and its adjoint. Closures capture slot ids, never references into the tape,
// because the slot vector grows during the forward pass.
namespace glformer::ad {

namespace detail {

inline Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractError("Var is not bound to a tape");
  return *a.tape;
}

inline Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands belong to different tapes");
  return tape_of(a);
}

inline std::uint64_t count(std::size_t a, std::size_t b = 1, std::size_t c = 1) {
  return static_cast<std::uint64_t>(a) * b * c;
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto n = detail::count(av.rows(), av.cols(), bv.cols());
  return t.record(ops::matmul(av, bv), {a, b},
                  [&t, a, b](const Matrix& g, GradBuffer& gb) {
                    if (gb.tracked(a.id)) gb.accumulate(a.id, ops::matmul_nt(g, t.value(b)));
                    if (gb.tracked(b.id)) gb.accumulate(b.id, ops::matmul_tn(t.value(a), g));
                  },
                  n);
}

// a · bᵀ
inline Var matmul_nt(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const auto n = detail::count(av.rows(), av.cols(), bv.rows());
  return t.record(ops::matmul_nt(av, bv), {a, b},
                  [&t, a, b](const Matrix& g, GradBuffer& gb) {
                    if (gb.tracked(a.id)) gb.accumulate(a.id, ops::matmul(g, t.value(b)));
                    if (gb.tracked(b.id)) gb.accumulate(b.id, ops::matmul_tn(g, t.value(a)));
                  },
                  n);
}

inline Var add(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  Matrix out = ops::add(a.value(), b.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, b},
                  [a, b](const Matrix& g, GradBuffer& gb) {
                    gb.accumulate(a.id, g);
                    gb.accumulate(b.id, g);
                  },
                  n);
}

inline Var hadamard(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  Matrix out = ops::hadamard(a.value(), b.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, b},
                  [&t, a, b](const Matrix& g, GradBuffer& gb) {
                    if (gb.tracked(a.id)) gb.accumulate(a.id, ops::hadamard(g, t.value(b)));
                    if (gb.tracked(b.id)) gb.accumulate(b.id, ops::hadamard(g, t.value(a)));
                  },
                  n);
}

// c·a + shift
inline Var affine(Var a, double c, double shift) {
  Tape& t = detail::tape_of(a);
  Matrix out = ops::affine(a.value(), c, shift);
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a},
                  [a, c](const Matrix& g, GradBuffer& gb) { gb.accumulate(a.id, ops::scale(g, c)); }, n);
}

inline Var scale(Var a, double c) { return affine(a, c, 0.0); }

inline Var one_minus(Var a) { return affine(a, -1.0, 1.0); }

// s·a where s is a 1×1 slot.
inline Var mul_scalar(Var a, Var s) {
  Tape& t = detail::tape_of(a, s);
  Matrix out = ops::scale(a.value(), s.value().item());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, s},
                  [&t, a, s](const Matrix& g, GradBuffer& gb) {
                    if (gb.tracked(a.id)) gb.accumulate(a.id, ops::scale(g, t.value(s).item()));
                    if (gb.tracked(s.id)) {
                      const Matrix& av = t.value(a);
                      double acc = 0.0;
                      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
                      gb.accumulate(s.id, Matrix::scalar(acc));
                    }
                  },
                  n);
}

// Broadcast a 1×cols bias over rows.
inline Var add_row(Var a, Var bias) {
  Tape& t = detail::tape_of(a, bias);
  Matrix out = ops::add_row(a.value(), bias.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, bias},
                  [a, bias](const Matrix& g, GradBuffer& gb) {
                    gb.accumulate(a.id, g);
                    if (gb.tracked(bias.id)) gb.accumulate(bias.id, ops::column_sums(g));
                  },
                  n);
}

// Broadcast a rows×1 bias over columns.
inline Var add_col(Var a, Var bias) {
  Tape& t = detail::tape_of(a, bias);
  Matrix out = ops::add_col(a.value(), bias.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, bias},
                  [a, bias](const Matrix& g, GradBuffer& gb) {
                    gb.accumulate(a.id, g);
                    if (gb.tracked(bias.id)) gb.accumulate(bias.id, ops::row_sums(g));
                  },
                  n);
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const std::size_t split = a.cols();
  Matrix out = ops::concat_cols(a.value(), b.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, b},
                  [a, b, split](const Matrix& g, GradBuffer& gb) {
                    Matrix ga(g.rows(), split);
                    Matrix gbm(g.rows(), g.cols() - split);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      auto r = g.row(i);
                      std::copy(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(split), ga.row(i).begin());
                      std::copy(r.begin() + static_cast<std::ptrdiff_t>(split), r.end(), gbm.row(i).begin());
                    }
                    gb.accumulate(a.id, std::move(ga));
                    gb.accumulate(b.id, std::move(gbm));
                  },
                  n);
}

// Stack b's rows below a's.
inline Var concat_rows(Var a, Var b) {
  Tape& t = detail::tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("concat_rows: column counts differ " + av.shape() + " vs " + bv.shape());
  }
  std::vector<double> data(av.values());
  data.insert(data.end(), bv.values().begin(), bv.values().end());
  const std::size_t top = av.rows();
  Matrix out(av.rows() + bv.rows(), av.cols(), std::move(data));
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a, b},
                  [a, b, top](const Matrix& g, GradBuffer& gb) {
                    const auto cut = static_cast<std::ptrdiff_t>(top * g.cols());
                    const auto& v = g.values();
                    gb.accumulate(a.id, Matrix(top, g.cols(), std::vector<double>(v.begin(), v.begin() + cut)));
                    gb.accumulate(b.id, Matrix(g.rows() - top, g.cols(), std::vector<double>(v.begin() + cut, v.end())));
                  },
                  n);
}

inline Var softmax_rows(Var a) {
  Tape& t = detail::tape_of(a);
  Matrix out = ops::softmax_rows(a.value());
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a},
                  [&t, a, yid = t.next_id()](const Matrix& g, GradBuffer& gb) {
                    const Matrix& y = t.value(Var{&t, yid});
                    Matrix gx(g.rows(), g.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      auto gr = g.row(i);
                      auto yr = y.row(i);
                      double dot = 0.0;
                      for (std::size_t j = 0; j < gr.size(); ++j) dot += gr[j] * yr[j];
                      auto out = gx.row(i);
                      for (std::size_t j = 0; j < gr.size(); ++j) out[j] = yr[j] * (gr[j] - dot);
                    }
                    gb.accumulate(a.id, std::move(gx));
                  },
                  n);
}

inline Var layer_norm_rows(Var a, Var gain, Var bias, double eps = ops::kLayerNormEps) {
  Tape& t = detail::tape_of(a, gain);
  detail::tape_of(a, bias);
  Matrix out = ops::layer_norm_rows(a.value(), gain.value(), bias.value(), eps);
  const auto n = detail::count(out.size(), 4);
  Tape::Backward back = [&t, a, gain, bias, eps](const Matrix& g, GradBuffer& gb) {
    const Matrix& x = t.value(a);
    const Matrix& gv = t.value(gain);
    const std::size_t cols = x.cols();
    const double nn = static_cast<double>(cols);
    Matrix gx(x.rows(), cols);
    Matrix ggain(1, cols);
    Matrix gbias(1, cols);
    std::vector<double> xhat(cols);
    std::vector<double> dxhat(cols);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto xr = x.row(i);
      double mean = 0.0;
      for (double v : xr) mean += v;
      mean /= nn;
      double var = 0.0;
      for (double v : xr) var += (v - mean) * (v - mean);
      var /= nn;
      const double inv = 1.0 / std::sqrt(var + eps);
      auto gr = g.row(i);
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        xhat[j] = (xr[j] - mean) * inv;
        dxhat[j] = gr[j] * gv[j];
        ggain[j] += gr[j] * xhat[j];
        gbias[j] += gr[j];
        sum_d += dxhat[j];
        sum_dx += dxhat[j] * xhat[j];
      }
      auto out = gx.row(i);
      for (std::size_t j = 0; j < cols; ++j) {
        out[j] = inv / nn * (nn * dxhat[j] - sum_d - xhat[j] * sum_dx);
      }
    }
    gb.accumulate(a.id, std::move(gx));
    gb.accumulate(gain.id, std::move(ggain));
    gb.accumulate(bias.id, std::move(gbias));
  };
  return t.record(std::move(out), {a, gain, bias}, std::move(back), n);
}

namespace detail {

// Elementwise map whose derivative is a function of (input, output).
template <typename Forward, typename Deriv>
Var unary(Var a, Forward f, Deriv df) {
  Tape& t = tape_of(a);
  Matrix out = ops::map(a.value(), f);
  const auto n = count(out.size());
  return t.record(std::move(out), {a},
                  [&t, a, yid = t.next_id(), df](const Matrix& g, GradBuffer& gb) {
                    const Matrix& x = t.value(a);
                    const Matrix& y = t.value(Var{&t, yid});
                    Matrix gx(g.rows(), g.cols());
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * df(x[i], y[i]);
                    gb.accumulate(a.id, std::move(gx));
                  },
                  n);
}

}  // namespace detail

inline Var gelu(Var a) {
  return detail::unary(a, ops::gelu_scalar, [](double x, double) { return ops::gelu_derivative(x); });
}

inline Var relu(Var a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(Var a) {
  return detail::unary(a, ops::sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

inline Var exp_neg(Var a) {
  return detail::unary(a, [](double x) { return std::exp(-x); }, [](double, double y) { return -y; });
}

// log(clamp(x, 1e-12, 1 - 1e-12)); zero gradient outside the clamp range.
inline Var log_clamped(Var a) {
  static constexpr double lo = ops::kLogClamp;
  static constexpr double hi = 1.0 - ops::kLogClamp;
  return detail::unary(
      a, [](double x) { return std::log(std::clamp(x, lo, hi)); },
      [](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0 / x; });
}

// Column-wise mean over rows: (r×c) -> (1×c).
inline Var mean_rows(Var a) {
  Tape& t = detail::tape_of(a);
  Matrix out = ops::mean_rows(a.value());
  const auto n = detail::count(a.value().size());
  return t.record(std::move(out), {a},
                  [&t, a](const Matrix& g, GradBuffer& gb) {
                    const Matrix& x = t.value(a);
                    const double inv = 1.0 / static_cast<double>(x.rows());
                    Matrix gx(x.rows(), x.cols());
                    for (std::size_t i = 0; i < x.rows(); ++i) {
                      auto r = gx.row(i);
                      for (std::size_t j = 0; j < x.cols(); ++j) r[j] = g[j] * inv;
                    }
                    gb.accumulate(a.id, std::move(gx));
                  },
                  n);
}

inline Var sum_all(Var a) {
  Tape& t = detail::tape_of(a);
  const auto n = detail::count(a.value().size());
  return t.record(Matrix::scalar(ops::sum(a.value())), {a},
                  [&t, a](const Matrix& g, GradBuffer& gb) {
                    const Matrix& x = t.value(a);
                    gb.accumulate(a.id, Matrix(x.rows(), x.cols(), g.item()));
                  },
                  n);
}

// Row i of the (rows × K) output is softmax(logits[0..valid[i]-1]) padded
// with zeros; rows with valid[i] == 0 are all zero. `logits` is 1×K.
inline Var masked_softmax_prefix(Var logits, std::span<const std::size_t> valid) {
  Tape& t = detail::tape_of(logits);
  const Matrix& w = logits.value();
  if (w.rows() != 1) throw DimensionError("masked_softmax_prefix: logits must be a row, got " + w.shape());
  const std::size_t k = w.cols();
  Matrix out(valid.size(), k);
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const std::size_t c = valid[i];
    if (c > k) throw DimensionError("masked_softmax_prefix: valid count exceeds kernel size");
    if (c == 0) continue;
    double m = w[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, w[j]);
    double z = 0.0;
    auto r = out.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      r[j] = std::exp(w[j] - m);
      z += r[j];
    }
    for (std::size_t j = 0; j < c; ++j) r[j] /= z;
    n += c;
  }
  std::vector<std::size_t> counts(valid.begin(), valid.end());
  return t.record(std::move(out), {logits},
                  [&t, logits, yid = t.next_id(), counts = std::move(counts)](const Matrix& g, GradBuffer& gb) {
                    const Matrix& y = t.value(Var{&t, yid});
                    Matrix gw(1, y.cols());
                    for (std::size_t i = 0; i < counts.size(); ++i) {
                      const std::size_t c = counts[i];
                      auto gr = g.row(i);
                      auto yr = y.row(i);
                      double dot = 0.0;
                      for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
                      for (std::size_t j = 0; j < c; ++j) gw[j] += yr[j] * (gr[j] - dot);
                    }
                    gb.accumulate(logits.id, std::move(gw));
                  },
                  n);
}

// Offset-weighted aggregation over earlier rows:
//   out[i] = sum_{k < valid[i]} weights[i,k] * h[i - offsets[k]]
// Rows with valid[i] == 0 copy h[i]. `offsets` ascending; valid[i] counts the
// offsets with offsets[k] <= i. Cost is sum(valid)·cols, independent of the
// total row count beyond linear growth.
inline Var banded_mix(Var h, Var weights, std::span<const std::size_t> offsets,
                      std::span<const std::size_t> valid) {
  Tape& t = detail::tape_of(h, weights);
  const Matrix& hv = h.value();
  const Matrix& wv = weights.value();
  const std::size_t rows = hv.rows();
  const std::size_t d = hv.cols();
  if (wv.rows() != rows || wv.cols() != offsets.size() || valid.size() != rows) {
    throw DimensionError("banded_mix: weights " + wv.shape() + " do not match " + hv.shape() + " with " +
                         std::to_string(offsets.size()) + " offsets");
  }
  Matrix out(rows, d);
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    auto o = out.row(i);
    if (valid[i] == 0) {
      auto src = hv.row(i);
      std::copy(src.begin(), src.end(), o.begin());
      n += d;
      continue;
    }
    for (std::size_t k = 0; k < valid[i]; ++k) {
      const double a = wv(i, k);
      const double* src = hv.row(i - offsets[k]).data();
      for (std::size_t j = 0; j < d; ++j) o[j] += a * src[j];
    }
    n += static_cast<std::uint64_t>(valid[i]) * d;
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  std::vector<std::size_t> counts(valid.begin(), valid.end());
  return t.record(std::move(out), {h, weights},
                  [&t, h, weights, offs = std::move(offs), counts = std::move(counts)](const Matrix& g,
                                                                                       GradBuffer& gb) {
                    const Matrix& hv = t.value(h);
                    const Matrix& wv = t.value(weights);
                    const std::size_t d = hv.cols();
                    if (gb.tracked(h.id)) {
                      Matrix gh(hv.rows(), d);
                      for (std::size_t i = 0; i < hv.rows(); ++i) {
                        auto gi = g.row(i);
                        if (counts[i] == 0) {
                          auto dst = gh.row(i);
                          for (std::size_t j = 0; j < d; ++j) dst[j] += gi[j];
                          continue;
                        }
                        for (std::size_t k = 0; k < counts[i]; ++k) {
                          const double a = wv(i, k);
                          double* dst = gh.row(i - offs[k]).data();
                          for (std::size_t j = 0; j < d; ++j) dst[j] += a * gi[j];
                        }
                      }
                      gb.accumulate(h.id, std::move(gh));
                    }
                    if (gb.tracked(weights.id)) {
                      Matrix gw(wv.rows(), wv.cols());
                      for (std::size_t i = 0; i < hv.rows(); ++i) {
                        auto gi = g.row(i);
                        for (std::size_t k = 0; k < counts[i]; ++k) {
                          const double* src = hv.row(i - offs[k]).data();
                          double acc = 0.0;
                          for (std::size_t j = 0; j < d; ++j) acc += gi[j] * src[j];
                          gw(i, k) = acc;
                        }
                      }
                      gb.accumulate(weights.id, std::move(gw));
                    }
                  },
                  n);
}

// Rows [begin, begin + count) of a.
inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = a.value();
  if (begin + count > av.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + av.shape());
  }
  const auto first = av.values().begin() + static_cast<std::ptrdiff_t>(begin * av.cols());
  Matrix out(count, av.cols(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * av.cols())));
  const auto n = detail::count(out.size());
  return t.record(std::move(out), {a},
                  [&t, a, begin](const Matrix& g, GradBuffer& gb) {
                    const Matrix& x = t.value(a);
                    Matrix gx(x.rows(), x.cols());
                    std::copy(g.values().begin(), g.values().end(),
                              gx.data().begin() + static_cast<std::ptrdiff_t>(begin * x.cols()));
                    gb.accumulate(a.id, std::move(gx));
                  },
                  n);
}

// Vertical concatenation of any number of blocks with equal column counts.
inline Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("stack_rows: nothing to stack");
  Tape& t = detail::tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::vector<double> data;
  std::vector<std::size_t> ids, heights;
  for (Var p : parts) {
    if (p.tape != &t) throw ContractError("stack_rows: operands belong to different tapes");
    if (p.cols() != cols) throw DimensionError("stack_rows: column counts differ");
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
    ids.push_back(p.id);
    heights.push_back(p.rows());
  }
  const std::size_t rows = data.size() / std::max<std::size_t>(cols, 1);
  Matrix out(cols == 0 ? 0 : rows, cols, std::move(data));
  const auto n = detail::count(out.size());
  return t.record(std::move(out), parts,
                  [ids = std::move(ids), heights = std::move(heights), cols](const Matrix& g, GradBuffer& gb) {
                    auto it = g.values().begin();
                    for (std::size_t b = 0; b < ids.size(); ++b) {
                      const auto len = static_cast<std::ptrdiff_t>(heights[b] * cols);
                      if (gb.tracked(ids[b])) {
                        gb.accumulate(ids[b], Matrix(heights[b], cols, std::vector<double>(it, it + len)));
                      }
                      it += len;
                    }
                  },
                  n);
}

// Column means within consecutive row segments [starts[b], starts[b+1]).
// Output has one row per segment.
inline Var segment_mean_rows(Var a, std::span<const std::size_t> starts) {
  Tape& t = detail::tape_of(a);
  const Matrix& av = a.value();
  if (starts.size() < 2 || starts.front() != 0 || starts.back() != av.rows()) {
    throw DimensionError("segment_mean_rows: segment bounds do not cover " + av.shape());
  }
  const std::size_t segs = starts.size() - 1;
  const std::size_t d = av.cols();
  Matrix out(segs, d);
  for (std::size_t b = 0; b < segs; ++b) {
    if (starts[b + 1] <= starts[b]) throw DimensionError("segment_mean_rows: empty segment");
    auto o = out.row(b);
    for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) {
      auto r = av.row(i);
      for (std::size_t j = 0; j < d; ++j) o[j] += r[j];
    }
    const double inv = 1.0 / static_cast<double>(starts[b + 1] - starts[b]);
    for (std::size_t j = 0; j < d; ++j) o[j] *= inv;
  }
  const auto n = detail::count(av.size());
  std::vector<std::size_t> bounds(starts.begin(), starts.end());
  return t.record(std::move(out), {a},
                  [&t, a, bounds = std::move(bounds)](const Matrix& g, GradBuffer& gb) {
                    const Matrix& x = t.value(a);
                    Matrix gx(x.rows(), x.cols());
                    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
                      const double inv = 1.0 / static_cast<double>(bounds[b + 1] - bounds[b]);
                      auto gr = g.row(b);
                      for (std::size_t i = bounds[b]; i < bounds[b + 1]; ++i) {
                        auto r = gx.row(i);
                        for (std::size_t j = 0; j < x.cols(); ++j) r[j] = gr[j] * inv;
                      }
                    }
                    gb.accumulate(a.id, std::move(gx));
                  },
                  n);
}

}  // namespace glformer::ad
