#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "glformer/cli/runspec.hpp"
#include "glformer/model.hpp"
#include "glformer/tgraph.hpp"
#include "glformer/traineval.hpp"

namespace glformer::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2 };

// Config and input-data problems are the caller's to fix (2); anything else
// that escapes a command is a runtime failure (1).
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e)) {
    return kUsage;
  }
  return kRuntime;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline std::string num(double v) { return csv_detail::format_double(v); }

inline void prepare_out(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("output directory not writable: " + dir.string());
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Sample standard deviation; 0 for a single value.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return r;
}

inline nlohmann::json stats_json(const std::vector<double>& v) {
  const MeanStd m = mean_std(v);
  return {{"mean", m.mean}, {"std", m.std}, {"values", v}};
}

inline TrainConfig run_config(const TrainConfig& base, std::size_t run) {
  TrainConfig c = base;
  c.seed = base.seed + run;
  return c;
}

inline EpochCallback progress(std::ostream& err, const std::string& tag) {
  return [&err, tag](const EpochStats& s) {
    err << tag << "epoch " << s.epoch << " loss " << fmt("%.6f", s.loss) << " val_ap " << fmt("%.4f", s.val_ap)
        << " val_auc " << fmt("%.4f", s.val_auc) << '\n';
  };
}

// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace detail

// ----------------------------------------------------------------- ingest --

inline int cmd_ingest(const RunSpec& spec, const std::filesystem::path& input, std::ostream& out,
                      std::ostream& err) {
  const EventStream s = ingest_csv(input, spec.ingest);
  detail::prepare_out(spec.out);
  std::ostringstream csv;
  write_csv(s, csv);
  detail::write_text(spec.out / "stream.csv", csv.str());
  const nlohmann::json summary{{"source", input.generic_string()},
                               {"nodes", s.node_count},
                               {"links", s.size()},
                               {"edge_feat_dim", s.edge_feat_dim},
                               {"node_feat_dim", s.node_feat_dim},
                               {"bipartite_ids", spec.ingest.bipartite_ids}};
  const auto report = spec.out / "ingest.json";
  detail::write_json(report, summary);
  err << "ingested " << input.string() << '\n';
  out << report.string() << '\n'
      << "nodes=" << s.node_count << " links=" << s.size() << " edge_feat_dim=" << s.edge_feat_dim << '\n';
  return kOk;
}

// ------------------------------------------------------------------ train --

inline int cmd_train(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  spec.validate();
  const EventStream stream = load_stream(spec);
  detail::prepare_out(spec.out);

  std::vector<MetricsReport> reports;
  std::string curve = "run,epoch,loss,val_ap\n";
  for (std::size_t run = 0; run < spec.runs; ++run) {
    const TrainConfig cfg = detail::run_config(spec.train, run);
    const std::string tag = spec.runs > 1 ? "run " + std::to_string(run) + " " : "";
    FitResult r = train(stream, spec.model, cfg, detail::progress(err, tag));
    for (std::size_t e = 0; e < r.report.epoch_losses.size(); ++e) {
      curve += std::to_string(run) + "," + std::to_string(e) + "," + detail::num(r.report.epoch_losses[e]) + "," +
               detail::num(r.report.val_ap_curve[e]) + "\n";
    }
    if (run == 0) {
      save_checkpoint((spec.out / "checkpoint.json").string(), spec.model, stream.node_feat_dim, stream.edge_feat_dim,
                      r.params);
    }
    reports.push_back(std::move(r.report));
  }

  nlohmann::json metrics;
  std::vector<double> test_ap, test_auc;
  for (const auto& r : reports) {
    test_ap.push_back(*r.test_ap);
    test_auc.push_back(*r.test_auc);
  }
  if (spec.runs == 1) {
    metrics = to_json(reports.front());
  } else {
    std::vector<double> val_ap, val_auc;
    for (const auto& r : reports) {
      val_ap.push_back(r.val_ap);
      val_auc.push_back(r.val_auc);
    }
    metrics["runs"] = nlohmann::json::array();
    for (const auto& r : reports) metrics["runs"].push_back(to_json(r));
    metrics["ap"] = {{"val", detail::stats_json(val_ap)}, {"test", detail::stats_json(test_ap)}};
    metrics["auc_roc"] = {{"val", detail::stats_json(val_auc)}, {"test", detail::stats_json(test_auc)}};
  }
  metrics["spec"] = to_json(spec);
  const auto report = spec.out / "metrics.json";
  detail::write_json(report, metrics);
  detail::write_text(spec.out / "loss_curve.csv", curve);

  const auto ap = detail::mean_std(test_ap), auc = detail::mean_std(test_auc);
  out << report.string() << '\n';
  if (spec.runs == 1) {
    out << "test_ap=" << detail::fmt("%.4f", ap.mean) << " test_auc=" << detail::fmt("%.4f", auc.mean)
        << " best_epoch=" << reports.front().best_epoch << " epochs=" << reports.front().epoch_losses.size() << '\n';
  } else {
    out << "runs=" << spec.runs << " test_ap=" << detail::fmt("%.4f", ap.mean) << "+-" << detail::fmt("%.4f", ap.std)
        << " test_auc=" << detail::fmt("%.4f", auc.mean) << "+-" << detail::fmt("%.4f", auc.std) << '\n';
  }
  return kOk;
}

// ------------------------------------------------------------------- eval --

inline int cmd_eval(const RunSpec& spec, const std::filesystem::path& checkpoint, std::ostream& out,
                    std::ostream& err) {
  spec.train.validate();
  if (!std::filesystem::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint.string());
  const Checkpoint ck = load_checkpoint(checkpoint.string());
  const EventStream stream = load_stream(spec);
  if (stream.node_feat_dim != ck.d_node || stream.edge_feat_dim != ck.d_edge) {
    throw ConfigError("checkpoint expects feature dims (" + std::to_string(ck.d_node) + ", " +
                      std::to_string(ck.d_edge) + "), dataset has (" + std::to_string(stream.node_feat_dim) + ", " +
                      std::to_string(stream.edge_feat_dim) + ")");
  }
  detail::prepare_out(spec.out);
  const auto split = chronological_split(stream, spec.train.train_ratio, spec.train.val_ratio);
  err << "evaluating " << checkpoint.string() << " on " << split.test.size() << " test events\n";
  const EvalResult r = evaluate_test(split, ck.config, ck.params, spec.train.seed, spec.train.batch_size);
  const nlohmann::json j{{"split", "test"},
                         {"pairs", r.pairs},
                         {"ap", r.ap},
                         {"auc_roc", r.auc},
                         {"checkpoint", checkpoint.generic_string()},
                         {"seed", spec.train.seed}};
  const auto report = spec.out / "eval.json";
  detail::write_json(report, j);
  out << report.string() << '\n'
      << "test_ap=" << detail::fmt("%.4f", r.ap) << " test_auc=" << detail::fmt("%.4f", r.auc) << '\n';
  return kOk;
}

// ----------------------------------------------------------------- ablate --

inline int cmd_ablate(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  spec.validate();
  const EventStream stream = load_stream(spec);
  detail::prepare_out(spec.out);

  struct Row {
    std::string name;
    std::vector<double> val_ap, val_auc, test_ap, test_auc;
    std::vector<double> betas;
    std::size_t epochs_run = 0;
  };
  std::vector<Row> rows;
  for (const std::string& name : spec.variants) {
    ModelConfig mc = spec.model;
    mc.ablation = ablation_variant(name);
    Row row{name, {}, {}, {}, {}, {}, 0};
    for (std::size_t run = 0; run < spec.runs; ++run) {
      const TrainConfig cfg = detail::run_config(spec.train, run);
      FitResult r = train(stream, mc, cfg, detail::progress(err, name + " run " + std::to_string(run) + " "));
      row.val_ap.push_back(r.report.val_ap);
      row.val_auc.push_back(r.report.val_auc);
      row.test_ap.push_back(*r.report.test_ap);
      row.test_auc.push_back(*r.report.test_auc);
      if (run == 0) {
        const auto dir = spec.out / "ablate" / name;
        detail::prepare_out(dir);
        const auto path = (dir / "checkpoint.json").string();
        save_checkpoint(path, mc, stream.node_feat_dim, stream.edge_feat_dim, r.params);
        const Checkpoint ck = load_checkpoint(path);
        row.betas = layer_betas(ck.params, ck.config);
        row.epochs_run = r.report.epoch_losses.size();
      }
    }
    rows.push_back(std::move(row));
  }

  nlohmann::json variants = nlohmann::json::array();
  std::string csv = "variant,val_ap,test_ap,val_auc,test_auc,test_ap_std,betas\n";
  const Row* full = nullptr;
  for (const Row& r : rows)
    if (r.name == "full") full = &r;
  for (const Row& r : rows) {
    nlohmann::json betas = nlohmann::json::array();
    std::string beta_field;
    for (double b : r.betas) {
      betas.push_back(std::isnan(b) ? nlohmann::json(nullptr) : nlohmann::json(b));
      beta_field += (beta_field.empty() ? "" : ";") + (std::isnan(b) ? std::string("na") : detail::num(b));
    }
    nlohmann::json v{{"variant", r.name},
                     {"ablation", to_json(ablation_variant(r.name))},
                     {"ap", {{"val", detail::stats_json(r.val_ap)}, {"test", detail::stats_json(r.test_ap)}}},
                     {"auc_roc", {{"val", detail::stats_json(r.val_auc)}, {"test", detail::stats_json(r.test_auc)}}},
                     {"betas", betas},
                     {"epochs_run", r.epochs_run}};
    // Seeds on which the full model's test AP is at least this variant's.
    if (full && full != &r) {
      std::size_t wins = 0;
      for (std::size_t i = 0; i < r.test_ap.size(); ++i) wins += full->test_ap[i] >= r.test_ap[i];
      v["full_at_least_as_good"] = wins;
    }
    variants.push_back(v);
    const auto ap = detail::mean_std(r.test_ap);
    csv += r.name + "," + detail::num(detail::mean_std(r.val_ap).mean) + "," + detail::num(ap.mean) + "," +
           detail::num(detail::mean_std(r.val_auc).mean) + "," + detail::num(detail::mean_std(r.test_auc).mean) + "," +
           detail::num(ap.std) + "," + beta_field + "\n";
  }
  const auto report = spec.out / "ablation.json";
  detail::write_json(report, {{"variants", variants}, {"runs", spec.runs}, {"spec", to_json(spec)}});
  detail::write_text(spec.out / "ablation.csv", csv);

  out << report.string() << '\n' << "variants=" << rows.size();
  for (const Row& r : rows) out << ' ' << r.name << '=' << detail::fmt("%.4f", detail::mean_std(r.test_ap).mean);
  out << '\n';
  return kOk;
}

// ------------------------------------------------------------------ bench --

struct BenchPoint {
  MixerKind mixer;
  std::size_t n;
  double median_ns;
  std::uint64_t ops;
};

struct BenchResult {
  std::vector<BenchPoint> points;
  std::map<MixerKind, double> time_slope;
  std::map<MixerKind, double> op_slope;
};

// Times one token-mixer forward pass per (mixer, N) at fixed d and layer
// offsets; op counts come from the tape tally of the same pass.
inline BenchResult run_bench(const BenchSpec& b, const ModelConfig& model, std::ostream& err) {
  b.validate();
  const auto specs = model.layer_specs();
  if (b.layer >= specs.size()) throw ConfigError("bench.layer out of range for the model schedule");
  const LayerSpec& layer = specs[b.layer];
  std::mt19937_64 rng(b.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> gap(0.0, 2.0);

  BenchResult res;
  for (MixerKind kind : b.mixers) {
    std::vector<double> ns, ts, os;
    for (std::size_t n : b.lengths) {
      Matrix h(n, b.d);
      for (double& v : h.data()) v = normal(rng);
      std::vector<double> times(n);
      double t = 0.0;
      for (double& v : times) v = (t += gap(rng));
      MixerParams params;
      switch (kind) {
        case MixerKind::Adaptive: {
          AdaptiveMixerParams p = init_adaptive(layer.offsets.size());
          for (double& v : p.order_logits.data()) v = normal(rng);
          params = std::move(p);
          break;
        }
        case MixerKind::Pooling: params = PoolingMixerParams{}; break;
        case MixerKind::Mlp: params = init_mlp_mixer(n, rng); break;
        case MixerKind::Attention: params = init_attention(b.d, rng); break;
      }
      std::vector<double> samples;
      std::uint64_t ops = 0;
      for (std::size_t rep = 0; rep < b.warmup + b.repeats; ++rep) {
        Tape tape(false);
        const auto start = std::chrono::steady_clock::now();
        const Var y = token_mix(tape.constant(h), times, layer, params, Ablation{}, single_segment(n));
        const auto stop = std::chrono::steady_clock::now();
        if (y.rows() != n) throw ContractError("bench: mixer changed the sequence length");
        ops = tape.op_count();
        if (rep >= b.warmup) samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
      }
      std::sort(samples.begin(), samples.end());
      const std::size_t m = samples.size();
      const double median = m % 2 ? samples[m / 2] : 0.5 * (samples[m / 2 - 1] + samples[m / 2]);
      res.points.push_back({kind, n, median, ops});
      ns.push_back(static_cast<double>(n));
      ts.push_back(std::max(median, 1.0));
      os.push_back(static_cast<double>(std::max<std::uint64_t>(ops, 1)));
      err << "bench " << to_string(kind) << " N=" << n << " median_ns=" << detail::fmt("%.0f", median)
          << " ops=" << ops << '\n';
    }
    res.time_slope[kind] = detail::log_log_slope(ns, ts);
    res.op_slope[kind] = detail::log_log_slope(ns, os);
  }
  return res;
}

inline int cmd_bench(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  spec.bench.validate();
  spec.model.validate();
  detail::prepare_out(spec.out);
  BenchSpec b = spec.bench;
  b.seed = spec.train.seed;
  const BenchResult res = run_bench(b, spec.model, err);

  std::string time_csv = "mixer,N,median_ns,slope\n", ops_csv = "mixer,N,ops,slope\n";
  for (const BenchPoint& p : res.points) {
    time_csv += to_string(p.mixer) + "," + std::to_string(p.n) + "," + detail::num(std::round(p.median_ns)) + "," +
                detail::num(res.time_slope.at(p.mixer)) + "\n";
    ops_csv += to_string(p.mixer) + "," + std::to_string(p.n) + "," + std::to_string(p.ops) + "," +
               detail::num(res.op_slope.at(p.mixer)) + "\n";
  }
  detail::write_text(spec.out / "bench_ops.csv", ops_csv);
  const auto report = spec.out / "bench.csv";
  detail::write_text(report, time_csv);

  out << report.string() << '\n';
  bool first = true;
  for (MixerKind k : b.mixers) {
    out << (first ? "" : " ") << to_string(k) << "_op_slope=" << detail::fmt("%.3f", res.op_slope.at(k)) << ' '
        << to_string(k) << "_time_slope=" << detail::fmt("%.3f", res.time_slope.at(k));
    first = false;
  }
  out << '\n';
  return kOk;
}

}  // namespace glformer::cli
