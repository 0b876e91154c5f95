#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "glformer/mixers.hpp"
#include "glformer/numcore.hpp"

using namespace glformer;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

std::vector<double> random_times(std::size_t n, std::mt19937_64& rng, double max_gap = 3.0) {
  std::uniform_real_distribution<double> u(0.0, max_gap);
  std::vector<double> t(n);
  double now = u(rng);
  for (auto& v : t) {
    v = now;
    now += u(rng);
  }
  return t;
}

AdaptiveMixerParams random_adaptive(std::size_t k, std::mt19937_64& rng) {
  return {random_matrix(1, k, rng, -2.0, 2.0), random_matrix(1, 1, rng, -2.0, 2.0)};
}

}  // namespace

// ------------------------------------------------------------- offsets --

TEST(Offsets, ScheduleExamples) {
  const OffsetSchedule s({2, 4, 8});
  EXPECT_EQ(hierarchical_offsets(s, 1), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(hierarchical_offsets(s, 2), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(hierarchical_offsets(s, 3), (std::vector<std::size_t>{4, 5, 6, 7, 8}));
  EXPECT_EQ(s.kernel_size(3), 5u);
  EXPECT_EQ(s.max_lookback(), 13u);
}

TEST(Offsets, LayerOutOfRange) {
  const OffsetSchedule s({2, 4, 8});
  EXPECT_THROW(hierarchical_offsets(s, 0), IndexError);
  EXPECT_THROW(hierarchical_offsets(s, 4), IndexError);
}

TEST(Offsets, BadSchedules) {
  EXPECT_THROW(OffsetSchedule(std::vector<std::size_t>{}), ConfigError);
  EXPECT_THROW(OffsetSchedule({0, 2}), ConfigError);
  EXPECT_THROW(OffsetSchedule({4, 4}), ConfigError);
}

TEST(Offsets, KernelSizeFormula) {
  const OffsetSchedule s({3, 5, 9, 20});
  for (std::size_t l = 2; l <= 4; ++l) {
    EXPECT_EQ(s.kernel_size(l), s.bounds()[l - 1] - s.bounds()[l - 2] + 1);
  }
}

// ------------------------------------------------------------ adaptive --

TEST(Adaptive, TimeOnlyWorkedExample) {
  const Matrix h{{1.0}, {2.0}, {3.0}};
  const std::vector<double> times{0.0, 1.0, 3.0};
  const std::vector<std::size_t> r{0, 1, 2};
  const auto valid = valid_offset_counts(r, 3);
  const Matrix theta = time_weights(times, r, valid);
  EXPECT_NEAR(theta(2, 0), 0.84380, 1e-5);
  EXPECT_NEAR(theta(2, 1), 0.11420, 1e-5);
  EXPECT_NEAR(theta(2, 2), 0.04201, 1e-5);
  const Matrix out = adaptive_mix(h, times, r, init_adaptive(3), FusionMode::TimeOnly);
  EXPECT_NEAR(out(2, 0), 2.80180, 1e-4);
}

TEST(Adaptive, EqualTimestampsGiveWindowMean) {
  std::mt19937_64 rng(5);
  const Matrix h = random_matrix(6, 3, rng);
  const std::vector<double> times(6, 7.0);
  const std::vector<std::size_t> r{0, 1, 2};
  const Matrix out = adaptive_mix(h, times, r, random_adaptive(3, rng), FusionMode::TimeOnly);
  EXPECT_EQ(out, pooling_mix(h, 3));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0;
      const std::size_t lo = i >= 2 ? i - 2 : 0;
      for (std::size_t j = lo; j <= i; ++j) m += h(j, c);
      EXPECT_NEAR(out(i, c), m / static_cast<double>(i - lo + 1), 1e-12);
    }
  }
}

TEST(Adaptive, SingleZeroOffsetIsIdentity) {
  std::mt19937_64 rng(6);
  const Matrix h = random_matrix(5, 4, rng);
  const auto times = random_times(5, rng);
  const std::vector<std::size_t> r{0};
  for (auto mode : {FusionMode::Learned, FusionMode::TimeOnly, FusionMode::OrderOnly}) {
    EXPECT_EQ(adaptive_mix(h, times, r, random_adaptive(1, rng), mode), h);
  }
}

TEST(Adaptive, BoundaryRowWithoutOffsetsCopied) {
  std::mt19937_64 rng(7);
  const Matrix h = random_matrix(6, 2, rng);
  const auto times = random_times(6, rng);
  const std::vector<std::size_t> r{2, 3, 4};
  const Matrix out = adaptive_mix(h, times, r, random_adaptive(3, rng), FusionMode::Learned);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(out(i, c), h(i, c));
  }
}

TEST(Adaptive, ShapeAndOrderErrors) {
  const Matrix h(3, 2, 1.0);
  const std::vector<std::size_t> r{0, 1};
  EXPECT_THROW(adaptive_mix(h, std::vector<double>{0.0, 1.0}, r, init_adaptive(2), FusionMode::Learned),
               DimensionError);
  EXPECT_THROW(adaptive_mix(h, std::vector<double>{0.0, 2.0, 1.0}, r, init_adaptive(2), FusionMode::Learned),
               ContractError);
  EXPECT_THROW(adaptive_mix(h, std::vector<double>{0.0, 1.0, 2.0}, r, init_adaptive(3), FusionMode::Learned),
               ConfigError);
}

TEST(Adaptive, FuzzWeightsSumToOneAndOutputInWindow) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> n_dist(1, 24);
  std::uniform_int_distribution<std::size_t> lo_dist(0, 6);
  std::uniform_int_distribution<std::size_t> width_dist(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = n_dist(rng);
    const std::size_t lo = lo_dist(rng);
    std::vector<std::size_t> r;
    for (std::size_t p = lo; p <= lo + width_dist(rng); ++p) r.push_back(p);
    const Matrix h = random_matrix(n, 3, rng, -5.0, 5.0);
    const auto times = random_times(n, rng, 10.0);
    const auto params = random_adaptive(r.size(), rng);
    Tape tape;
    const Matrix alpha = adaptive_weights(tape, times, r, params, FusionMode::Learned).value();
    const Matrix out = adaptive_mix(h, times, r, params, FusionMode::Learned);
    const auto valid = valid_offset_counts(r, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (valid[i] == 0) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < r.size(); ++k) s += alpha(i, k);
      EXPECT_NEAR(s, 1.0, 1e-12);
      for (std::size_t c = 0; c < 3; ++c) {
        double mn = INFINITY, mx = -INFINITY;
        for (std::size_t k = 0; k < valid[i]; ++k) {
          mn = std::min(mn, h(i - r[k], c));
          mx = std::max(mx, h(i - r[k], c));
        }
        EXPECT_GE(out(i, c), mn - 1e-12);
        EXPECT_LE(out(i, c), mx + 1e-12);
      }
    }
  }
}

TEST(Adaptive, CausalDependencyPattern) {
  std::mt19937_64 rng(8);
  const std::size_t n = 16;
  const std::vector<std::size_t> r{2, 3, 4};
  const Matrix h = random_matrix(n, 2, rng);
  const auto times = random_times(n, rng);
  const auto params = random_adaptive(3, rng);
  const Matrix base = adaptive_mix(h, times, r, params, FusionMode::Learned);
  for (std::size_t j = 0; j < n; ++j) {
    Matrix hp = h;
    hp(j, 0) += 1.0;
    const Matrix out = adaptive_mix(hp, times, r, params, FusionMode::Learned);
    for (std::size_t i = 0; i < n; ++i) {
      const bool copied = i < 2 && i == j;
      const bool expected = copied || (i >= j && std::find(r.begin(), r.end(), i - j) != r.end());
      EXPECT_EQ(out(i, 0) != base(i, 0), expected) << "i=" << i << " j=" << j;
    }
  }
}

TEST(Adaptive, ThetaShiftInvariant) {
  std::mt19937_64 rng(9);
  std::vector<double> times(12);
  std::uniform_int_distribution<int> gap(0, 4);
  double now = 0;
  for (auto& t : times) t = now += gap(rng);
  std::vector<double> shifted = times;
  for (auto& t : shifted) t += 1 << 20;
  const std::vector<std::size_t> r{0, 1, 2, 3};
  const auto valid = valid_offset_counts(r, times.size());
  EXPECT_EQ(time_weights(times, r, valid), time_weights(shifted, r, valid));
}

TEST(Adaptive, BetaPinnedByMode) {
  AdaptiveMixerParams p = init_adaptive(3);
  p.fusion_logit(0, 0) = 1.7;
  EXPECT_EQ(effective_beta(p, FusionMode::TimeOnly), 0.0);
  EXPECT_EQ(effective_beta(p, FusionMode::OrderOnly), 1.0);
  EXPECT_NEAR(effective_beta(p, FusionMode::Learned), 1.0 / (1.0 + std::exp(-1.7)), 1e-15);
}

TEST(Adaptive, OpCountLinearInTokens) {
  const std::vector<std::size_t> r{4, 5, 6, 7, 8};
  const auto params = init_adaptive(5);
  std::mt19937_64 rng(10);
  std::vector<std::uint64_t> counts;
  for (std::size_t n : {512u, 1024u, 2048u}) {
    const Matrix h = random_matrix(n, 8, rng);
    const auto times = random_times(n, rng);
    Tape tape;
    const std::uint64_t before = tape.op_count();
    adaptive_mix(tape.constant(h), times, r, params, FusionMode::Learned);
    counts.push_back(tape.op_count() - before);
  }
  for (std::size_t i = 1; i < counts.size(); ++i) {
    const double ratio = static_cast<double>(counts[i]) / static_cast<double>(counts[i - 1]);
    EXPECT_NEAR(ratio, 2.0, 0.02);
  }
}

TEST(Adaptive, GradCheck) {
  std::mt19937_64 rng(12);
  Matrix h = random_matrix(9, 3, rng);
  const auto times = random_times(9, rng);
  AdaptiveMixerParams p = random_adaptive(3, rng);
  const std::vector<std::size_t> r{1, 2, 3};
  Matrix probe = random_matrix(9, 3, rng);
  auto f = [&](Tape& t) {
    const Var out = adaptive_mix(t.param(h), times, r, p, FusionMode::Learned);
    return ad::sum_all(ad::hadamard(out, t.constant(probe)));
  };
  std::vector<Matrix*> params{&h, &p.order_logits, &p.fusion_logit};
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

// ------------------------------------------------------------- pooling --

TEST(Pooling, Examples) {
  const Matrix h{{1.0}, {3.0}, {5.0}};
  EXPECT_EQ(pooling_mix(h, 2), (Matrix{{1.0}, {2.0}, {4.0}}));
  EXPECT_EQ(pooling_mix(h, 1), h);
  const Matrix running = pooling_mix(h, 10);
  EXPECT_DOUBLE_EQ(running(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(running(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(running(2, 0), 3.0);
  EXPECT_THROW(pooling_mix(h, 0), ContractError);
}

// ----------------------------------------------------------------- MLP --

TEST(Mlp, HiddenTokenCount) {
  EXPECT_EQ(mlp_hidden_tokens(4), 2u);
  EXPECT_EQ(mlp_hidden_tokens(3), 2u);
  std::mt19937_64 rng(1);
  const auto p = init_mlp_mixer(3, rng);
  EXPECT_EQ(p.w1.rows(), 2u);
  EXPECT_EQ(p.w2.cols(), 2u);
}

TEST(Mlp, ZeroWeightsZeroOutput) {
  MlpMixerParams p{Matrix(2, 4), Matrix(2, 1), Matrix(4, 2), Matrix(4, 1)};
  std::mt19937_64 rng(2);
  EXPECT_EQ(mlp_mix(random_matrix(4, 3, rng), p, Activation::Gelu), Matrix(4, 3));
}

TEST(Mlp, TokenCountMismatch) {
  std::mt19937_64 rng(3);
  const auto p = init_mlp_mixer(4, rng);
  EXPECT_THROW(mlp_mix(Matrix(5, 2), p, Activation::Gelu), ConfigError);
}

TEST(Mlp, GradCheck) {
  std::mt19937_64 rng(4);
  Matrix h = random_matrix(4, 3, rng);
  MlpMixerParams p = init_mlp_mixer(4, rng);
  p.b1 = random_matrix(2, 1, rng);
  p.b2 = random_matrix(4, 1, rng);
  auto f = [&](Tape& t) { return ad::sum_all(ad::gelu(mlp_mix(t.param(h), p, Activation::Gelu))); };
  std::vector<Matrix*> params{&h, &p.w1, &p.b1, &p.w2, &p.b2};
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

// ----------------------------------------------------------- attention --

TEST(Attention, SingleTokenIdentityProjections) {
  const Matrix eye{{1.0, 0.0}, {0.0, 1.0}};
  const AttentionParams p{eye, eye, eye, eye};
  const Matrix h{{0.3, -1.2}};
  EXPECT_EQ(attention_mix(h, p), h);
}

TEST(Attention, IdenticalTokensIdenticalRows) {
  std::mt19937_64 rng(5);
  const auto p = init_attention(3, rng);
  Matrix h = random_matrix(3, 3, rng);
  for (std::size_t c = 0; c < 3; ++c) h(2, c) = h(0, c);
  const Matrix out = attention_mix(h, p);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out(0, c), out(2, c));
}

TEST(Attention, ScoreRowsSumToOne) {
  std::mt19937_64 rng(6);
  const auto p = init_attention(4, rng);
  Tape tape;
  const Matrix s = attention_scores(tape.constant(random_matrix(3, 4, rng)), p).value();
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) sum += s(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Attention, ShapeMismatch) {
  std::mt19937_64 rng(7);
  const auto p = init_attention(4, rng);
  EXPECT_THROW(attention_mix(Matrix(3, 5), p), DimensionError);
}

TEST(Attention, PermutationEquivarianceDistinguishesMixers) {
  std::mt19937_64 rng(8);
  const std::size_t n = 6;
  const auto p = init_attention(3, rng);
  const Matrix h = random_matrix(n, 3, rng);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Matrix hp(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) hp(i, c) = h(perm[i], c);
  }
  auto permuted = [&](const Matrix& m) {
    Matrix out(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) out(i, c) = m(perm[i], c);
    }
    return out;
  };
  auto max_diff = [](const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
  };
  EXPECT_LT(max_diff(attention_mix(hp, p), permuted(attention_mix(h, p))), 1e-12);
  EXPECT_GT(max_diff(pooling_mix(hp, 3), permuted(pooling_mix(h, 3))), 1e-3);
  const std::vector<double> times{0, 1, 2, 3, 4, 5};
  const std::vector<std::size_t> r{0, 1, 2};
  const auto ap = random_adaptive(3, rng);
  EXPECT_GT(max_diff(adaptive_mix(hp, times, r, ap, FusionMode::Learned),
                     permuted(adaptive_mix(h, times, r, ap, FusionMode::Learned))),
            1e-3);
}

TEST(Attention, OpCountQuadratic) {
  std::mt19937_64 rng(9);
  const auto p = init_attention(4, rng);
  std::vector<double> counts;
  for (std::size_t n : {256u, 512u}) {
    Tape tape;
    attention_mix(tape.constant(random_matrix(n, 4, rng)), p);
    counts.push_back(static_cast<double>(tape.op_count()));
  }
  EXPECT_GT(counts[1] / counts[0], 3.5);
}

TEST(Attention, GradCheck) {
  std::mt19937_64 rng(10);
  Matrix h = random_matrix(4, 3, rng);
  AttentionParams p = init_attention(3, rng);
  auto f = [&](Tape& t) { return ad::sum_all(ad::gelu(attention_mix(t.param(h), p))); };
  std::vector<Matrix*> params{&h, &p.w_q, &p.w_k, &p.w_v, &p.w_o};
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

// ------------------------------------------------------- channel mixer --

TEST(Channel, ZeroFfnIsIdentity) {
  std::mt19937_64 rng(11);
  ChannelMixerParams p = init_channel_mixer(3, rng);
  p.w_ff2 = Matrix(12, 3);
  const Matrix h = random_matrix(4, 3, rng);
  EXPECT_EQ(channel_mix(h, p, Activation::Gelu), h);
  EXPECT_EQ(channel_mix(h, p, Activation::Gelu, false), Matrix(4, 3));
}

TEST(Channel, HandEvaluatedFixture) {
  // d = 2, hidden 8. LN of [1, 3] is [-1, 1] (up to eps).
  ChannelMixerParams p{Matrix{{2.0, 1.0}}, Matrix{{0.5, -0.5}}, Matrix(2, 8), Matrix(1, 8), Matrix(8, 2),
                       Matrix{{0.1, 0.2}}};
  p.w_ff1(0, 0) = 1.0;   // hidden 0 = n0
  p.w_ff1(1, 1) = -2.0;  // hidden 1 = -2·n1
  p.b_ff1(0, 1) = 0.25;
  p.w_ff2(0, 0) = 3.0;
  p.w_ff2(1, 1) = 1.0;
  const Matrix h{{1.0, 3.0}};
  const double s = std::sqrt(1.0 + 1e-12);
  const double n0 = 2.0 * (-1.0 / s) + 0.5;
  const double n1 = 1.0 * (1.0 / s) - 0.5;
  const double h0 = ops::gelu_scalar(n0);
  const double h1 = ops::gelu_scalar(-2.0 * n1 + 0.25);
  const Matrix out = channel_mix(h, p, Activation::Gelu);
  EXPECT_NEAR(out(0, 0), 1.0 + 3.0 * h0 + 0.1, 1e-12);
  EXPECT_NEAR(out(0, 1), 3.0 + h1 + 0.2, 1e-12);
  const Matrix relu = channel_mix(h, p, Activation::Relu);
  EXPECT_NEAR(relu(0, 0), 1.0 + 3.0 * std::max(0.0, n0) + 0.1, 1e-12);
  EXPECT_NEAR(relu(0, 1), 3.0 + std::max(0.0, -2.0 * n1 + 0.25) + 0.2, 1e-12);
}

TEST(Channel, GradCheck) {
  std::mt19937_64 rng(12);
  Matrix h = random_matrix(3, 2, rng);
  ChannelMixerParams p = init_channel_mixer(2, rng);
  p.ln_bias = random_matrix(1, 2, rng);
  p.b_ff1 = random_matrix(1, 8, rng);
  auto f = [&](Tape& t) { return ad::sum_all(ad::gelu(channel_mix(t.param(h), p, Activation::Gelu))); };
  std::vector<Matrix*> params{&h, &p.ln_gain, &p.ln_bias, &p.w_ff1, &p.b_ff1, &p.w_ff2, &p.b_ff2};
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}

// --------------------------------------------------------- token block --

TEST(TokenBlock, IdentityMixZeroFfnDoubles) {
  std::mt19937_64 rng(13);
  LayerParams lp{init_adaptive(1), init_channel_mixer(3, rng)};
  lp.channel.w_ff2 = Matrix(12, 3);
  const Matrix h = random_matrix(5, 3, rng);
  const auto times = random_times(5, rng);
  const LayerSpec spec{{0}, 1};
  const Matrix out = token_block(h, times, spec, lp, Ablation{});
  for (std::size_t i = 0; i < h.values().size(); ++i) EXPECT_EQ(out.values()[i], 2.0 * h.values()[i]);
}

TEST(TokenBlock, AblationFlagSemantics) {
  std::mt19937_64 rng(14);
  const LayerParams lp{random_adaptive(3, rng), init_channel_mixer(3, rng)};
  const Matrix h = random_matrix(7, 3, rng);
  const auto times = random_times(7, rng);
  const LayerSpec spec{{0, 1, 2}, 3};
  const Matrix mixed = adaptive_mix(h, times, spec.offsets, std::get<AdaptiveMixerParams>(lp.mixer),
                                    FusionMode::Learned);
  Ablation no_cm;
  no_cm.no_cm = true;
  Matrix hat = h;
  for (std::size_t i = 0; i < hat.values().size(); ++i) hat.data()[i] += mixed.values()[i];
  EXPECT_EQ(token_block(h, times, spec, lp, no_cm), hat);
  Ablation bare = no_cm;
  bare.no_resnet = true;
  EXPECT_EQ(token_block(h, times, spec, lp, bare), mixed);
  Ablation both;
  both.no_lp = both.no_rt = true;
  EXPECT_THROW(token_block(h, times, spec, lp, both), ConfigError);
}

TEST(TokenBlock, MixerKindRoundTrip) {
  for (auto k : {MixerKind::Adaptive, MixerKind::Pooling, MixerKind::Mlp, MixerKind::Attention}) {
    EXPECT_EQ(parse_mixer_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_mixer_kind("conv"), ConfigError);
}

// Perturbation oracle for the stacked adaptive blocks.
TEST(TokenBlock, ReceptiveFieldMatchesAnalyticSet) {
  std::mt19937_64 rng(15);
  const OffsetSchedule sched({2, 4, 8});
  const std::size_t n = 32, d = 3;
  std::vector<LayerParams> layers;
  std::vector<LayerSpec> specs;
  for (std::size_t l = 1; l <= sched.layers(); ++l) {
    const auto r = sched.offsets(l);
    layers.push_back({random_adaptive(r.size(), rng), init_channel_mixer(d, rng)});
    specs.push_back({r, r.size()});
  }
  const Matrix h = random_matrix(n, d, rng);
  const auto times = random_times(n, rng);
  auto run = [&](const Matrix& in) {
    Matrix x = in;
    for (std::size_t l = 0; l < layers.size(); ++l) x = token_block(x, times, specs[l], layers[l], Ablation{});
    return x;
  };
  const Matrix base = run(h);
  const std::size_t lookback = sched.max_lookback();
  for (std::size_t j = 0; j < n; ++j) {
    Matrix hp = h;
    hp(j, 1) += 0.5;
    const Matrix out = run(hp);
    for (std::size_t i = 0; i < n; ++i) {
      bool changed = false;
      for (std::size_t c = 0; c < d; ++c) changed = changed || out(i, c) != base(i, c);
      const bool expected = i >= j && i - j <= lookback;
      EXPECT_EQ(changed, expected) << "i=" << i << " j=" << j;
    }
  }
}

TEST(TokenBlock, GradCheckEveryMixer) {
  std::mt19937_64 rng(16);
  const std::size_t n = 5, d = 2;
  const auto times = random_times(n, rng);
  const LayerSpec spec{{0, 1, 2}, 2};
  std::vector<MixerParams> mixers{random_adaptive(3, rng), PoolingMixerParams{}, init_mlp_mixer(n, rng),
                                  init_attention(d, rng)};
  for (auto& m : mixers) {
    LayerParams lp{m, init_channel_mixer(d, rng)};
    Matrix h = random_matrix(n, d, rng);
    auto f = [&](Tape& t) { return ad::sum_all(ad::gelu(token_block(t.param(h), times, spec, lp, Ablation{}))); };
    std::vector<Matrix*> params{&h, &lp.channel.w_ff1, &lp.channel.ln_gain};
    const auto rep = grad_check(f, params);
    EXPECT_TRUE(rep.passed) << to_string(kind_of(lp.mixer)) << " " << rep.max_rel_error;
  }
}

TEST(TokenBlock, StackedSegmentsMatchSeparateRuns) {
  std::mt19937_64 rng(17);
  const std::size_t d = 3, n = 6;
  const std::vector<std::size_t> lens{4, 1, 6, 2};
  std::vector<std::size_t> starts{0};
  for (auto l : lens) starts.push_back(starts.back() + l);
  std::vector<Matrix> blocks;
  std::vector<double> times;
  for (auto l : lens) {
    blocks.push_back(random_matrix(l, d, rng));
    const auto t = random_times(l, rng);
    times.insert(times.end(), t.begin(), t.end());
  }
  Matrix stacked(starts.back(), d);
  for (std::size_t b = 0; b < lens.size(); ++b) {
    for (std::size_t i = 0; i < lens[b]; ++i) {
      for (std::size_t c = 0; c < d; ++c) stacked(starts[b] + i, c) = blocks[b](i, c);
    }
  }
  const LayerSpec spec{{1, 2, 3}, 3};
  std::vector<MixerParams> mixers{random_adaptive(3, rng), PoolingMixerParams{}, init_attention(d, rng)};
  for (auto& m : mixers) {
    const LayerParams lp{m, init_channel_mixer(d, rng)};
    Tape tape;
    const Matrix all = token_block(tape.constant(stacked), times, spec, lp, Ablation{}, starts).value();
    for (std::size_t b = 0; b < lens.size(); ++b) {
      const std::span<const double> tb(times.data() + starts[b], lens[b]);
      const Matrix one = token_block(blocks[b], tb, spec, lp, Ablation{});
      for (std::size_t i = 0; i < lens[b]; ++i) {
        for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(all(starts[b] + i, c), one(i, c)) << to_string(kind_of(m));
      }
    }
  }
  // MLP needs equal-length segments.
  const LayerParams lp{init_mlp_mixer(n, rng), init_channel_mixer(d, rng)};
  const Matrix two = random_matrix(2 * n, d, rng);
  const std::vector<double> t2(2 * n, 1.0);
  const std::vector<std::size_t> s2{0, n, 2 * n};
  Tape tape;
  const Matrix all = token_block(tape.constant(two), t2, spec, lp, Ablation{}, s2).value();
  Matrix second(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) second(i, c) = two(n + i, c);
  const Matrix one = token_block(second, std::span<const double>(t2.data(), n), spec, lp, Ablation{});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) EXPECT_EQ(all(n + i, c), one(i, c));
}

TEST(Autodiff, SliceStackSegmentMeanGradCheck) {
  std::mt19937_64 rng(18);
  Matrix a = random_matrix(7, 3, rng);
  Matrix b = random_matrix(2, 3, rng);
  const std::vector<std::size_t> starts{0, 3, 4, 9};
  auto f = [&](Tape& t) {
    const Var va = t.param(a);
    const std::vector<Var> parts{ad::slice_rows(va, 4, 3), t.param(b), ad::slice_rows(va, 0, 4)};
    const Var s = ad::stack_rows(parts);
    return ad::sum_all(ad::gelu(ad::segment_mean_rows(ad::gelu(s), starts)));
  };
  std::vector<Matrix*> params{&a, &b};
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
}
