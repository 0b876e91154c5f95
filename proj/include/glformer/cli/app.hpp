#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glformer/cli/commands.hpp"
#include "glformer/cli/runspec.hpp"

namespace glformer::cli {

// Values given on the command line. Applied on top of the config file, which
// is applied on top of the defaults.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  bool bipartite_ids = false;
  std::optional<std::size_t> epochs, batch_size, patience, runs, d, n_max;
  std::optional<double> lr;
  std::optional<std::string> mixer, variant;
  std::optional<std::vector<std::size_t>> schedule;
  std::optional<std::vector<std::string>> variants;
  std::optional<std::vector<std::size_t>> lengths;
  std::optional<std::vector<std::string>> mixers;
  std::optional<std::size_t> repeats, warmup;
};

inline void apply(const Overrides& o, RunSpec& s) {
  if (o.seed) s.train.seed = *o.seed;
  if (o.out) s.out = *o.out;
  if (o.dataset) {
    s.dataset = *o.dataset;
    s.synthetic.reset();
  }
  if (o.bipartite_ids) s.ingest.bipartite_ids = true;
  if (o.epochs) s.train.epochs = *o.epochs;
  if (o.batch_size) s.train.batch_size = *o.batch_size;
  if (o.patience) s.train.patience = *o.patience;
  if (o.lr) s.train.lr = *o.lr;
  if (o.runs) s.runs = *o.runs;
  if (o.d) s.model.d = *o.d;
  if (o.n_max) s.model.n_max = *o.n_max;
  if (o.schedule) s.model.schedule = *o.schedule;
  if (o.mixer) s.model.mixer = parse_mixer_kind(*o.mixer);
  if (o.variant) s.model.ablation = ablation_variant(*o.variant);
  if (o.variants) s.variants = *o.variants;
  if (o.lengths) s.bench.lengths = *o.lengths;
  if (o.mixers) {
    s.bench.mixers.clear();
    for (const auto& m : *o.mixers) s.bench.mixers.push_back(parse_mixer_kind(m));
  }
  if (o.repeats) s.bench.repeats = *o.repeats;
  if (o.warmup) s.bench.warmup = *o.warmup;
}

namespace detail {

template <class T>
void bind_opt(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

inline void add_data_flags(CLI::App* app, Overrides& o) {
  bind_opt(app, "--dataset", o.dataset, "CSV event file (src,dst,timestamp,label,f1..fk)");
  app->add_flag("--bipartite-ids", o.bipartite_ids, "source and destination ids are separate namespaces");
}

inline void add_train_flags(CLI::App* app, Overrides& o) {
  add_data_flags(app, o);
  bind_opt(app, "--epochs", o.epochs, "maximum epochs");
  bind_opt(app, "--lr", o.lr, "Adam learning rate");
  bind_opt(app, "--batch-size", o.batch_size, "events per batch");
  bind_opt(app, "--patience", o.patience, "early-stopping patience (epochs)");
  bind_opt(app, "--runs", o.runs, "independent runs with seeds seed..seed+runs-1");
  bind_opt(app, "--d", o.d, "hidden dimension");
  bind_opt(app, "--n-max", o.n_max, "neighbors per query");
  bind_opt(app, "--schedule", o.schedule, "per-layer offset bounds, e.g. 2 4 8");
  bind_opt(app, "--mixer", o.mixer, "adaptive | pooling | mlp | attention");
}

}  // namespace detail

// Parses argv and runs one subcommand. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"glformer: temporal link prediction with adaptive token mixers"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  std::string config;
  detail::bind_opt(&app, "--seed", o.seed, "random seed");
  detail::bind_opt(&app, "--out", o.out, "output directory");
  app.add_option("--config", config, "JSON run spec");

  std::string input;
  auto* ingest = app.add_subcommand("ingest", "parse a CSV event file and write a normalized copy");
  ingest->add_option("input", input, "CSV event file")->required();
  ingest->add_flag("--bipartite-ids", o.bipartite_ids, "source and destination ids are separate namespaces");

  auto* train_cmd = app.add_subcommand("train", "train and evaluate; writes metrics.json, checkpoint, loss_curve.csv");
  detail::add_train_flags(train_cmd, o);
  detail::bind_opt(train_cmd, "--variant", o.variant, "ablation variant (full, no_lp, no_rt, relu, no_resnet, no_cm)");

  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  detail::add_data_flags(eval_cmd, o);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/checkpoint.json)");

  auto* ablate = app.add_subcommand("ablate", "train every ablation variant with identical seeds");
  detail::add_train_flags(ablate, o);
  detail::bind_opt(ablate, "--variants", o.variants, "subset of variants to run");

  auto* bench = app.add_subcommand("bench", "time token mixers over sequence lengths");
  detail::bind_opt(bench, "--lengths", o.lengths, "ascending sequence lengths (at least 3)");
  detail::bind_opt(bench, "--mixers", o.mixers, "mixers to time");
  detail::bind_opt(bench, "--repeats", o.repeats, "timed repeats per point");
  detail::bind_opt(bench, "--warmup", o.warmup, "untimed warmup passes per point");
  detail::bind_opt(bench, "--d", o.d, "hidden dimension");
  detail::bind_opt(bench, "--schedule", o.schedule, "offset schedule; layer 0 sets K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    RunSpec spec = config.empty() ? RunSpec{} : load_run_spec(config);
    apply(o, spec);
    if (bench->parsed() && o.d) spec.bench.d = *o.d;
    if (ingest->parsed()) return cmd_ingest(spec, input, out, err);
    if (train_cmd->parsed()) return cmd_train(spec, out, err);
    if (eval_cmd->parsed()) {
      return cmd_eval(spec, checkpoint.empty() ? spec.out / "checkpoint.json" : std::filesystem::path(checkpoint),
                      out, err);
    }
    if (ablate->parsed()) return cmd_ablate(spec, out, err);
    return cmd_bench(spec, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace glformer::cli
