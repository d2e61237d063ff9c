// loganmeta: command-line front end for the log anomaly pipeline.
//
// Exit status: 0 success, 1 invalid input or configuration (one-line
// diagnostic on stderr), 2 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "loganmeta/loganmeta.hpp"

namespace fs = std::filesystem;
using namespace loganmeta;

namespace {

bool g_quiet = false;

void log_event(const Json& event) {
  if (!g_quiet) std::cerr << event.dump() << "\n";
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

/// Defaults, then the --config file, then explicit flags (applied by callers).
RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg;
  if (!path.empty()) cfg = run_config_from_json(parse_json(read_file(path), "config " + path));
  if (seed) cfg.seed = *seed;
  return cfg;
}

void write_run_config(const fs::path& out_dir, const std::string& command, const RunConfig& cfg,
                      const Json& inputs) {
  const Json j{{"command", command}, {"version", kVersion}, {"inputs", inputs}, {"config", to_json(cfg)}};
  write_file((out_dir / "run_config.json").string(), j.dump(2) + "\n");
}

fs::path make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_dataset(const std::string& path, const LabeledDataset& ds, bool labeled) {
  if (labeled || path.ends_with(".lam") || path.ends_with(".bin"))
    save_dataset(path, ds);
  else
    write_file(path, dataset_to_csv(ds, false));
}

// ---- parse ----

struct ParseOpts {
  std::string input, out_templates, out_assignments, config, timestamp_regex = drain::kDefaultTimestampPattern;
  std::optional<std::size_t> depth, max_children;
  std::optional<double> sim_threshold;
  std::optional<std::uint64_t> seed;
};

int run_parse(const ParseOpts& o) {
  RunConfig cfg = load_run_config(o.config, o.seed);
  if (o.depth) cfg.drain.depth = *o.depth;
  if (o.sim_threshold) cfg.drain.similarity_threshold = *o.sim_threshold;
  if (o.max_children) cfg.drain.max_children = *o.max_children;
  cfg.resolve();
  const auto records = drain::read_log_records(read_file(o.input), o.timestamp_regex);
  drain::ParseTree tree(cfg.drain);
  std::vector<drain::Assignment> assignments;
  assignments.reserve(records.size());
  for (const auto& r : records)
    assignments.push_back({r.line, r.record.timestamp_ms, tree.parse_line(r.record)});
  const auto templates = tree.export_templates();
  write_file(o.out_templates, drain::templates_to_csv(templates));
  write_file(o.out_assignments, drain::assignments_to_csv(assignments));
  log_event({{"event", "parsed"}, {"lines", records.size()}, {"templates", templates.size()}});
  return 0;
}

// ---- featurize ----

struct FeaturizeOpts {
  std::string assignments, labels, templates, out, config, idf;
  std::optional<std::int64_t> window_secs;
  bool drop_empty = false;
  std::optional<std::uint64_t> seed;
};

int run_featurize(const FeaturizeOpts& o) {
  RunConfig cfg = load_run_config(o.config, o.seed);
  if (o.window_secs) cfg.window_secs = *o.window_secs;
  if (o.drop_empty) cfg.keep_empty_windows = false;
  if (!o.idf.empty()) cfg.idf = o.idf == "raw" ? features::IdfKind::Raw : features::IdfKind::Smooth;
  cfg.resolve();

  const auto rows = drain::assignments_from_csv(read_file(o.assignments));
  std::size_t vocab = 0;
  std::vector<features::TimedEvent> events;
  for (const auto& a : rows) {
    events.push_back({a.timestamp_ms, a.template_id});
    vocab = std::max(vocab, a.template_id + 1);
  }
  if (!o.templates.empty()) {
    const auto t = drain::templates_from_csv(read_file(o.templates));
    if (t.size() < vocab)
      throw Error(ErrorCode::IdOutOfRange, "assignments use template ids beyond the template table");
    vocab = t.size();
  }
  const auto windows = features::window_logs(events, {cfg.window_secs * 1000, cfg.keep_empty_windows});
  const auto counts = features::count_vectorize(windows, vocab);
  const auto model = features::fit_tfidf(counts, cfg.idf);

  LabeledDataset ds;
  ds.features = features::transform_tfidf(model, counts);
  ds.labels.assign(windows.size(), 0);
  const bool labeled = !o.labels.empty();
  if (labeled) {
    const auto window_labels = synth::window_labels_from_csv(read_file(o.labels));
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i].index >= window_labels.size())
        throw Error(ErrorCode::LengthMismatch, "label file covers " + std::to_string(window_labels.size()) +
                                                   " windows, logs span at least " +
                                                   std::to_string(windows[i].index + 1));
      ds.labels[i] = window_labels[windows[i].index];
    }
  }
  write_dataset(o.out, ds, labeled);
  log_event({{"event", "featurized"}, {"windows", windows.size()}, {"features", vocab}});
  return 0;
}

// ---- generate ----

struct GenerateOpts {
  std::string spec, out_features, out_logs, out_labels;
  std::optional<std::size_t> rows, pool_size;
  std::optional<double> separation;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateOpts& o) {
  RunConfig cfg;
  if (!o.spec.empty()) {
    const Json j = parse_json(read_file(o.spec), "spec " + o.spec);
    if (j.is_object() && (j.contains("synth") || j.contains("config")))
      cfg = run_config_from_json(j);
    else
      from_json(j, cfg.synth);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.rows) cfg.synth.n_rows = *o.rows;
  if (o.separation) cfg.synth.class_separation = *o.separation;
  if (o.pool_size) cfg.template_pool_size = *o.pool_size;
  cfg.resolve();
  if (o.out_features.empty() && o.out_logs.empty())
    throw Error(ErrorCode::InvalidConfig, "nothing to do: give --out-features and/or --out-logs");
  if (!o.out_features.empty()) save_dataset(o.out_features, synth::generate_features(cfg.synth));
  if (!o.out_logs.empty()) {
    const auto logs = synth::generate_raw_logs(cfg.synth, cfg.template_pool_size);
    write_file(o.out_logs, logs.text);
    const std::string labels = o.out_labels.empty() ? o.out_logs + ".labels.csv" : o.out_labels;
    write_file(labels, synth::window_labels_to_csv(logs.window_labels));
  }
  log_event({{"event", "generated"}, {"rows", cfg.synth.n_rows}, {"seed", cfg.seed}});
  return 0;
}

// ---- train-meta ----

struct TrainMetaOpts {
  std::string data, config, out_dir, resume;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  int checkpoint_every = 0;
};

int run_train_meta(const TrainMetaOpts& o) {
  RunConfig cfg = load_run_config(o.config, o.seed);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  cfg.resolve();
  const auto ds = load_dataset(o.data);
  const auto part = episodes::partition(ds);
  episodes::MetaSplit split = cfg.split ? *cfg.split : episodes::default_split(part);
  cfg.split = split;
  const fs::path out = make_out_dir(o.out_dir);
  const fs::path ckpt = out / "checkpoint.lamc";

  std::optional<meta::MetaTrainer> trainer;
  if (!o.resume.empty()) {
    auto ck = load_meta_checkpoint(o.resume);
    auto expected = to_json(ck.config);
    auto actual = to_json(cfg);
    expected["train"].erase("epochs");
    actual["train"].erase("epochs");
    if (expected != actual)
      throw Error(ErrorCode::InvalidConfig, "resume config differs from the checkpoint's (only train.epochs may change)");
    trainer.emplace(ds, ck.split, cfg.train, std::move(ck.state));
  } else {
    trainer.emplace(ds, split, cfg.train);
  }
  write_run_config(out, "train-meta", cfg, {{"data", o.data}, {"resume", o.resume}});
  while (trainer->completed_epochs() < cfg.train.epochs) {
    const auto rec = trainer->run_epoch();
    log_event({{"event", "epoch"},
               {"epoch", rec.epoch},
               {"lr", rec.lr},
               {"train_loss", rec.train.total_loss},
               {"train_acc", rec.train.accuracy},
               {"val_loss", rec.val.total_loss},
               {"val_acc", rec.val.accuracy}});
    if (o.checkpoint_every > 0 && trainer->completed_epochs() % o.checkpoint_every == 0)
      save_meta_checkpoint(ckpt.string(), {cfg, trainer->split(), trainer->state()});
  }
  write_file((out / "metrics.csv").string(), trainer->log().to_csv());
  save_meta_checkpoint(ckpt.string(), {cfg, trainer->split(), trainer->state()});
  return 0;
}

// ---- train-baseline ----

struct TrainBaselineOpts {
  std::string mode = "binary", data, config, out_dir, profile;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
};

Json baseline_eval_json(const baselines::EvalResult& ev, baselines::Mode mode) {
  Json recall = Json::object();
  for (std::size_t k = 0; k < ev.classes.size(); ++k) recall[std::to_string(ev.classes[k])] = ev.recall[k];
  std::vector<int> anomalies;
  for (int c : ev.classes)
    if (c != 0 || mode == baselines::Mode::AnomalyOnly) anomalies.push_back(c);
  return {{"model", "baseline"},
          {"mode", baselines::to_string(mode)},
          {"accuracy", ev.accuracy},
          {"macro_recall_anomaly", mode == baselines::Mode::Binary ? ev.recall.at(1) : ev.macro_recall(anomalies)},
          {"n_rows", ev.n_rows},
          {"recall", recall}};
}

int run_train_baseline(const TrainBaselineOpts& o) {
  RunConfig cfg = load_run_config(o.config, o.seed);
  if (!o.profile.empty()) {
    cfg.baseline_profile = o.profile;
    const int epochs = cfg.baseline.epochs;
    cfg.baseline = o.profile == "tuned" ? baselines::BaselineConfig::tuned() : baselines::BaselineConfig::strict();
    cfg.baseline.epochs = epochs;
  }
  if (o.epochs) cfg.baseline.epochs = *o.epochs;
  cfg.resolve();
  const auto mode = baselines::mode_from_string(o.mode);
  const auto ds = load_dataset(o.data);
  const fs::path out = make_out_dir(o.out_dir);
  write_run_config(out, "train-baseline", cfg, {{"data", o.data}, {"mode", o.mode}});
  const auto res = baselines::train_baseline(ds, mode, cfg.baseline);
  write_file((out / "metrics.csv").string(), metrics_to_csv(res.log));
  save_baseline_checkpoint((out / "checkpoint.lamc").string(), {cfg, mode, res.params});
  const auto ev = baselines::eval_baseline(res.params, ds, mode, &res.val_rows);
  const Json summary = baseline_eval_json(ev, mode);
  write_file((out / "eval.json").string(), summary.dump(2) + "\n");
  log_event({{"event", "baseline_done"}, {"mode", o.mode}, {"val_accuracy", ev.accuracy}});
  return 0;
}

// ---- eval ----

struct EvalOpts {
  std::string checkpoint, data, classes = "val", rows = "val";
  int episodes = 500;
  std::optional<std::uint64_t> seed;
};

int run_eval(const EvalOpts& o) {
  const Json side = load_sidecar(o.checkpoint);
  const auto ds = load_dataset(o.data);
  Json result;
  if (side.value("model", "") == "baseline") {
    const auto ck = load_baseline_checkpoint(o.checkpoint);
    std::vector<std::size_t> rows;
    if (o.rows == "val") rows = baselines::split_rows(ds, ck.mode, ck.config.baseline).second;
    const auto ev = baselines::eval_baseline(ck.params, ds, ck.mode, o.rows == "val" ? &rows : nullptr);
    result = baseline_eval_json(ev, ck.mode);
    result["rows"] = o.rows;
  } else {
    const auto ck = load_meta_checkpoint(o.checkpoint);
    if (o.episodes < 1) throw Error(ErrorCode::InvalidConfig, "--episodes must be >= 1");
    std::vector<int> classes;
    if (o.classes == "val") {
      classes = ck.split.val_classes;
    } else if (o.classes == "train") {
      classes = ck.split.train_classes;
    } else {
      for (const auto& [c, r] : episodes::partition(ds).anomalous) classes.push_back(c);
    }
    const std::uint64_t seed = o.seed ? *o.seed : derive_seed(ck.config.seed, "eval");
    const auto ev = meta::evaluate(ck.state.params, ds, classes, ck.config.train.episode, o.episodes, seed,
                                   ck.config.train.distance);
    Json recall = Json::object();
    for (const auto& [c, r] : ev.recall) recall[std::to_string(c)] = r;
    result = {{"model", "meta"},     {"classes", o.classes},  {"episodes", o.episodes}, {"seed", seed},
              {"accuracy", ev.accuracy}, {"n_queries", ev.n_queries}, {"recall", recall}};
  }
  std::cout << result.dump(2) << "\n";
  return 0;
}

// ---- embed ----

struct EmbedOpts {
  std::string checkpoint, data, out;
  bool project = false;
  std::optional<std::uint64_t> seed;
};

int run_embed(const EmbedOpts& o) {
  const auto ck = load_meta_checkpoint(o.checkpoint);
  const auto ds = load_dataset(o.data);
  std::string csv = meta::export_embeddings(ck.state.params, ds);
  if (o.project) {
    projection::PowerIterationConfig pc;
    pc.seed = o.seed ? *o.seed : derive_seed(ck.config.seed, "projection");
    const auto p = projection::project_2d(nn::forward_eval(ck.state.params, ds.features), pc);
    const auto lines = split_lines(csv);
    std::string merged;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      merged += std::string(lines[i]);
      merged += i == 0 ? ",pc0,pc1" : "," + format_double(p(i - 1, 0)) + "," + format_double(p(i - 1, 1));
      merged.push_back('\n');
    }
    csv = std::move(merged);
  }
  write_file(o.out, csv);
  return 0;
}

// ---- compare ----

struct CompareOpts {
  std::string meta, binary, multiclass, out;
};

int run_compare(const CompareOpts& o) {
  if (o.meta.empty() && o.binary.empty() && o.multiclass.empty())
    throw Error(ErrorCode::InvalidConfig, "compare needs at least one of --meta, --binary, --multiclass");
  std::string table = "| Model | Epochs | Validation accuracy |\n|---|---:|---:|\n";
  const auto row = [&](const std::string& name, const std::string& path) {
    if (path.empty()) return;
    const auto rows = metrics_from_csv(read_file(path));
    const auto acc = final_accuracy(rows, "val");
    if (!acc) throw Error(ErrorCode::Format, path + " has no validation rows");
    int epochs = 0;
    for (const auto& r : rows) epochs = std::max(epochs, r.epoch + 1);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * *acc);
    table += "| " + name + " | " + std::to_string(epochs) + " | " + buf + " |\n";
  };
  row("Hybrid proto-net (2-way 2-shot)", o.meta);
  row("Binary classifier", o.binary);
  row("Multi-class classifier", o.multiclass);
  write_file(o.out, table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loganmeta: few-shot log anomaly detection pipeline"};
  app.set_version_flag("--version", std::string("loganmeta ") + kVersion + " (dataset LAM1, checkpoint LAMC v" +
                                        std::to_string(checkpoint::kFormatVersion) + ", metrics csv v1)");
  app.require_subcommand(1);
  app.add_flag("--quiet", g_quiet, "Suppress progress events on stderr");
  std::function<int()> action;

  const auto seed_opt = [](CLI::App* sub, std::optional<std::uint64_t>& seed) {
    sub->add_option("--seed", seed, "Top-level seed (overrides the config file)");
  };

  ParseOpts parse;
  auto* p = app.add_subcommand("parse", "Mine templates from a raw log file");
  p->add_option("--input", parse.input)->required()->check(CLI::ExistingFile);
  p->add_option("--out-templates", parse.out_templates)->required();
  p->add_option("--out-assignments", parse.out_assignments)->required();
  p->add_option("--depth", parse.depth, "Tree depth including root and length layer");
  p->add_option("--sim-threshold", parse.sim_threshold);
  p->add_option("--max-children", parse.max_children);
  p->add_option("--timestamp-regex", parse.timestamp_regex, "Leading timestamp regex; group 1 is ISO-8601");
  p->add_option("--config", parse.config)->check(CLI::ExistingFile);
  seed_opt(p, parse.seed);
  p->callback([&] { action = [&] { return run_parse(parse); }; });

  FeaturizeOpts feat;
  auto* f = app.add_subcommand("featurize", "Window template assignments into tf-idf rows");
  f->add_option("--assignments", feat.assignments)->required()->check(CLI::ExistingFile);
  f->add_option("--labels", feat.labels, "CSV window,label")->check(CLI::ExistingFile);
  f->add_option("--templates", feat.templates, "Template CSV fixing the vocabulary size")->check(CLI::ExistingFile);
  f->add_option("--window-secs", feat.window_secs);
  f->add_flag("--drop-empty", feat.drop_empty, "Skip windows without any log line");
  f->add_option("--idf", feat.idf)->check(CLI::IsMember({"smooth", "raw"}));
  f->add_option("--out", feat.out)->required();
  f->add_option("--config", feat.config)->check(CLI::ExistingFile);
  seed_opt(f, feat.seed);
  f->callback([&] { action = [&] { return run_featurize(feat); }; });

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic dataset and/or raw logs");
  g->add_option("--spec", gen.spec, "JSON synth spec (or full run config)")->check(CLI::ExistingFile);
  g->add_option("--out-features", gen.out_features);
  g->add_option("--out-logs", gen.out_logs);
  g->add_option("--out-labels", gen.out_labels, "Window labels CSV (default <out-logs>.labels.csv)");
  g->add_option("--rows", gen.rows);
  g->add_option("--class-separation", gen.separation);
  g->add_option("--template-pool-size", gen.pool_size);
  seed_opt(g, gen.seed);
  g->callback([&] { action = [&] { return run_generate(gen); }; });

  TrainMetaOpts tm;
  auto* t = app.add_subcommand("train-meta", "Episodic training of the hybrid proto-net encoder");
  t->add_option("--data", tm.data)->required()->check(CLI::ExistingFile);
  t->add_option("--config", tm.config)->check(CLI::ExistingFile);
  t->add_option("--out-dir", tm.out_dir)->required();
  t->add_option("--epochs", tm.epochs);
  t->add_option("--resume", tm.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  t->add_option("--checkpoint-every", tm.checkpoint_every, "Also checkpoint every N epochs");
  seed_opt(t, tm.seed);
  t->callback([&] { action = [&] { return run_train_meta(tm); }; });

  TrainBaselineOpts tb;
  auto* b = app.add_subcommand("train-baseline", "Supervised feed-forward baseline");
  b->add_option("--mode", tb.mode)->check(CLI::IsMember({"binary", "multiclass", "anomaly-only"}));
  b->add_option("--data", tb.data)->required()->check(CLI::ExistingFile);
  b->add_option("--config", tb.config)->check(CLI::ExistingFile);
  b->add_option("--out-dir", tb.out_dir)->required();
  b->add_option("--profile", tb.profile)->check(CLI::IsMember({"strict", "tuned"}));
  b->add_option("--epochs", tb.epochs);
  seed_opt(b, tb.seed);
  b->callback([&] { action = [&] { return run_train_baseline(tb); }; });

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint; JSON on stdout");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--episodes", ev.episodes, "Episodes for meta checkpoints");
  e->add_option("--classes", ev.classes, "Anomaly classes for meta episodes")
      ->check(CLI::IsMember({"val", "train", "all"}));
  e->add_option("--rows", ev.rows, "Rows for baseline checkpoints")->check(CLI::IsMember({"val", "all"}));
  seed_opt(e, ev.seed);
  e->callback([&] { action = [&] { return run_eval(ev); }; });

  EmbedOpts em;
  auto* m = app.add_subcommand("embed", "Export eval-mode embeddings");
  m->add_option("--checkpoint", em.checkpoint)->required()->check(CLI::ExistingFile);
  m->add_option("--data", em.data)->required()->check(CLI::ExistingFile);
  m->add_option("--out", em.out)->required();
  m->add_flag("--project-2d", em.project, "Append a 2-D PCA projection (pc0, pc1)");
  seed_opt(m, em.seed);
  m->callback([&] { action = [&] { return run_embed(em); }; });

  CompareOpts cmp;
  std::optional<std::uint64_t> compare_seed;
  auto* c = app.add_subcommand("compare", "Accuracy table from metrics files");
  c->add_option("--meta", cmp.meta)->check(CLI::ExistingFile);
  c->add_option("--binary", cmp.binary)->check(CLI::ExistingFile);
  c->add_option("--multiclass", cmp.multiclass)->check(CLI::ExistingFile);
  c->add_option("--out", cmp.out)->required();
  seed_opt(c, compare_seed);
  c->callback([&] { action = [&] { return run_compare(cmp); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    std::cerr << "loganmeta: error: " << one_line(err.what()) << "\n";
    return 1;
  }

  try {
    return action();
  } catch (const Error& err) {
    std::cerr << "loganmeta: error: " << one_line(err.what()) << "\n";
    return err.is_validation() ? 1 : 2;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "loganmeta: error: " << one_line(err.what()) << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "loganmeta: runtime failure: " << one_line(err.what()) << "\n";
    return 2;
  }
}
