#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "glformer/model.hpp"
#include "glformer/numcore.hpp"
#include "glformer/tgraph.hpp"

using namespace glformer;

namespace {

EventStream small_stream(std::size_t events, std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.num_src = 3;
  spec.num_dst = 3;
  spec.num_events = events;
  spec.seed = seed;
  return generate_synthetic(spec);
}

ModelConfig tiny_config(MixerKind kind = MixerKind::Adaptive) {
  ModelConfig c;
  c.schedule = {2, 4};
  c.d = 4;
  c.d_time = 6;
  c.n_max = 6;
  c.mixer = kind;
  return c;
}

LinkBatch batch_from(const EventStream& s, std::uint64_t seed) {
  const auto cands = negative_candidates(s);
  Rng rng(seed);
  LinkBatch b;
  for (const Event& e : s.events) {
    b.src.push_back(e.src);
    b.dst.push_back(e.dst);
    b.neg.push_back(sample_negative(rng, e.src, e.dst, cands));
    b.t.push_back(e.t);
  }
  return b;
}

void randomize(ModelParams& p, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& [name, m] : p.tensors()) {
    for (double& v : m->data()) v += u(rng);
  }
}

}  // namespace

// ----------------------------------------------------------- predictor --

TEST(Predictor, ZeroWeightsGiveHalf) {
  const PredictorParams p{Matrix(4, 2), Matrix(1, 2), Matrix(2, 1), Matrix(1, 1)};
  EXPECT_EQ(predict_link(Matrix{{1.0, 2.0}}, Matrix{{-3.0, 0.5}}, p), 0.5);
}

TEST(Predictor, ConstructedLogitLn3) {
  PredictorParams p{Matrix(4, 2), Matrix(1, 2), Matrix(2, 1), Matrix(1, 1)};
  p.k1(0, 0) = 1.0;  // hidden 0 = Z_u[0]
  p.k2(0, 0) = std::log(3.0);
  EXPECT_NEAR(predict_link(Matrix{{1.0, 0.0}}, Matrix{{0.0, 0.0}}, p), 0.75, 1e-15);
}

TEST(Predictor, ConcatenationIsOrdered) {
  std::mt19937_64 rng(1);
  const PredictorParams p{glorot_uniform(4, 2, rng), Matrix(1, 2), glorot_uniform(2, 1, rng), Matrix(1, 1)};
  const Matrix a{{1.0, -2.0}}, b{{0.3, 0.9}};
  EXPECT_NE(predict_link(a, b, p), predict_link(b, a, p));
}

// ---------------------------------------------------------------- loss --

TEST(Loss, Examples) {
  EXPECT_NEAR(bce_loss(std::vector<double>{0.5}, std::vector<double>{0.5}), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(std::vector<double>{1.0 / std::exp(1.0)}, std::vector<double>{}), 1.0, 1e-15);
  const double near_perfect = bce_loss(std::vector<double>{1.0 - 1e-9}, std::vector<double>{1e-9});
  EXPECT_GT(near_perfect, 0.0);
  EXPECT_LT(near_perfect, 1e-8);
  EXPECT_THROW(bce_loss(std::vector<double>{}, std::vector<double>{}), ContractError);
}

TEST(Loss, TapeMatchesScalar) {
  Tape tape;
  const Var pos = tape.constant(Matrix{{0.9}, {0.2}});
  const Var neg = tape.constant(Matrix{{0.4}});
  EXPECT_NEAR(bce_loss(pos, neg).value().item(),
              bce_loss(std::vector<double>{0.9, 0.2}, std::vector<double>{0.4}), 1e-15);
  EXPECT_THROW(bce_loss(std::nullopt, std::nullopt), ContractError);
}

// ----------------------------------------------------------- node_repr --

TEST(NodeRepr, NoHistoryIsDeterministic) {
  const EventStream s = small_stream(20);
  const TemporalStore store(s);
  const ModelConfig c = tiny_config();
  std::mt19937_64 rng(2);
  const ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
  const Matrix a = node_repr(store, s.events[0].src, s.events[0].t, c, p);
  const Matrix b = node_repr(store, s.events[0].src, s.events[0].t, c, p);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.cols(), 4u);
  for (double v : a.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(NodeRepr, SingleNeighborZeroFfnDoublesToken) {
  EventStream s = small_stream(4);
  const TemporalStore store(s);
  ModelConfig c = tiny_config();
  c.schedule = {2};
  std::mt19937_64 rng(3);
  ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
  p.layers[0].channel.w_ff2 = Matrix(16, 4);
  // Only the first interaction precedes t (gaps are at least 1).
  const NodeId node = s.events[0].src;
  const double t = s.events[0].t + 0.5;
  const auto seq = store.recent_neighbors(node, t, c.n_max);
  ASSERT_EQ(seq.size(), 1u);
  const Matrix token = embed_neighbors(seq, t, s, p.encoder);
  const Matrix z = node_repr(store, node, t, c, p);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(z(0, j), 2.0 * token(0, j));
}

TEST(NodeRepr, BatchMatchesSingleQueries) {
  const EventStream s = small_stream(40);
  const TemporalStore store(s);
  for (auto kind : {MixerKind::Adaptive, MixerKind::Pooling, MixerKind::Mlp, MixerKind::Attention}) {
    const ModelConfig c = tiny_config(kind);
    std::mt19937_64 rng(4);
    const ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
    std::vector<NodeQuery> qs;
    for (std::size_t i = 0; i < s.size(); i += 3) qs.push_back({s.events[i].src, s.events[i].t});
    qs.push_back({s.events[5].dst, 0.0});
    Tape tape(false);
    const Matrix z = encode_nodes(tape, store, qs, c, p).value();
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const Matrix one = node_repr(store, qs[i].node, qs[i].t, c, p);
      for (std::size_t j = 0; j < c.d; ++j) EXPECT_EQ(z(i, j), one(0, j)) << to_string(kind);
    }
  }
}

TEST(NodeRepr, GlobalTimeShiftBitIdentical) {
  const EventStream s = small_stream(60);
  EventStream shifted = s;
  for (Event& e : shifted.events) e.t += 1000.0;
  const TemporalStore a(s), b(shifted);
  const ModelConfig c = tiny_config();
  std::mt19937_64 rng(5);
  ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
  randomize(p, rng);
  for (std::size_t i = 0; i < s.size(); i += 7) {
    const Event& e = s.events[i];
    EXPECT_EQ(node_repr(a, e.src, e.t, c, p), node_repr(b, e.src, e.t + 1000.0, c, p));
    EXPECT_EQ(node_repr(a, e.dst, e.t, c, p), node_repr(b, e.dst, e.t + 1000.0, c, p));
  }
}

TEST(NodeRepr, NeighborOrderMattersForAdaptiveNotAttention) {
  // Node 0 meets 1, 2, 3, 4 at one shared time; the second stream lists the
  // same interactions in another order.
  auto make = [](std::vector<NodeId> order) {
    EventStream s;
    s.node_count = 6;
    s.edge_feat_dim = 6;
    for (NodeId n : order) {
      std::vector<double> f(6, 0.0);
      f[n] = 1.0;
      s.events.push_back({0, n, 5.0, f, std::nullopt});
    }
    finalize_stream(s);
    return s;
  };
  const EventStream a = make({1, 2, 3, 4});
  const EventStream b = make({3, 1, 4, 2});
  const TemporalStore sa(a), sb(b);
  auto max_diff = [](const Matrix& x, const Matrix& y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
  };
  ModelConfig c = tiny_config(MixerKind::Attention);
  c.schedule = {4};
  std::mt19937_64 rng(6);
  ModelParams p = init_model(c, 0, 6, rng);
  EXPECT_LT(max_diff(node_repr(sa, 0, 9.0, c, p), node_repr(sb, 0, 9.0, c, p)), 1e-12);

  c.mixer = MixerKind::Adaptive;
  rng.seed(6);
  p = init_model(c, 0, 6, rng);
  randomize(p, rng);
  EXPECT_GT(max_diff(node_repr(sa, 0, 9.0, c, p), node_repr(sb, 0, 9.0, c, p)), 1e-6);
}

// ------------------------------------------------------ gradient check --

TEST(Model, FullGradientCheckSixEvents) {
  const EventStream s = small_stream(6);
  const TemporalStore store(s);
  ModelConfig c = tiny_config();
  std::mt19937_64 rng(7);
  ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
  randomize(p, rng, 0.3);
  const LinkBatch batch = batch_from(s, 11);
  auto f = [&](Tape& t) { return batch_loss(t, store, batch, c, p); };
  const auto params = p.tensor_ptrs();
  const auto rep = grad_check(f, params);
  EXPECT_TRUE(rep.passed) << "max rel error " << rep.max_rel_error;
  EXPECT_LE(rep.max_rel_error, 1e-4);
}

TEST(Model, GradientCheckEveryMixerAndAblation) {
  const EventStream s = small_stream(6);
  const TemporalStore store(s);
  std::vector<ModelConfig> configs;
  for (auto kind : {MixerKind::Pooling, MixerKind::Mlp, MixerKind::Attention}) configs.push_back(tiny_config(kind));
  for (const auto& v : ablation_variants()) {
    ModelConfig c = tiny_config();
    c.ablation = ablation_variant(v);
    configs.push_back(c);
  }
  for (const ModelConfig& c : configs) {
    std::mt19937_64 rng(8);
    ModelParams p = init_model(c, s.node_feat_dim, s.edge_feat_dim, rng);
    randomize(p, rng, 0.3);
    const LinkBatch batch = batch_from(s, 12);
    auto f = [&](Tape& t) { return batch_loss(t, store, batch, c, p); };
    const auto params = p.tensor_ptrs();
    const auto rep = grad_check(f, params);
    EXPECT_TRUE(rep.passed) << to_json(c).dump() << " " << rep.max_rel_error;
  }
}

// ---------------------------------------------------------- checkpoint --

TEST(Checkpoint, RoundTripBitExact) {
  for (auto kind : {MixerKind::Adaptive, MixerKind::Pooling, MixerKind::Mlp, MixerKind::Attention}) {
    ModelConfig c = tiny_config(kind);
    c.ablation.relu = true;
    std::mt19937_64 rng(9);
    ModelParams p = init_model(c, 2, 5, rng);
    randomize(p, rng, 1e-3);
    const auto path = std::filesystem::temp_directory_path() / ("glformer_ckpt_" + to_string(kind) + ".json");
    save_checkpoint(path.string(), c, 2, 5, p);
    Checkpoint back = load_checkpoint(path.string());
    EXPECT_EQ(back.config, c);
    EXPECT_EQ(back.d_node, 2u);
    EXPECT_EQ(back.d_edge, 5u);
    auto a = p.tensors();
    auto b = back.params.tensors();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].name, b[i].name);
      EXPECT_EQ(*a[i].tensor, *b[i].tensor) << a[i].name;
    }
    std::filesystem::remove(path);
  }
}

TEST(Checkpoint, RejectsWrongVersionAndShape) {
  ModelConfig c = tiny_config();
  std::mt19937_64 rng(10);
  ModelParams p = init_model(c, 0, 3, rng);
  auto j = checkpoint_to_json(c, 0, 3, p);
  auto bad = j;
  bad["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad), ConfigError);
  bad = j;
  bad["tensors"][0]["rows"] = 7;
  EXPECT_THROW(checkpoint_from_json(bad), ConfigError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), ConfigError);
}

TEST(Checkpoint, BetaIntrospection) {
  for (const auto& v : ablation_variants()) {
    ModelConfig c = tiny_config();
    c.ablation = ablation_variant(v);
    std::mt19937_64 rng(11);
    ModelParams p = init_model(c, 0, 3, rng);
    randomize(p, rng);
    const auto back = checkpoint_from_json(checkpoint_to_json(c, 0, 3, p));
    for (double beta : layer_betas(back.params, back.config)) {
      if (v == "no_lp") {
        EXPECT_EQ(beta, 0.0);
      } else if (v == "no_rt") {
        EXPECT_EQ(beta, 1.0);
      } else {
        EXPECT_GT(beta, 0.0);
        EXPECT_LT(beta, 1.0);
      }
    }
  }
}

// -------------------------------------------------------------- config --

TEST(ModelConfig, JsonRoundTripAndErrors) {
  ModelConfig c = tiny_config(MixerKind::Mlp);
  c.ablation.no_cm = true;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"dee", 3}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"layers", 3}, {"schedule", {2, 4}}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"schedule", {4, 2}}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"mixer", "conv"}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"ablation", {{"no_lp", true}, {"no_rt", true}}}}), ConfigError);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"d", "four"}}), ConfigError);
}
