// Copyright 2026 The mcforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli_app.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli_config.hpp"
#include "mcforge/annotate.hpp"
#include "mcforge/checkpoint.hpp"
#include "mcforge/corpus.hpp"
#include "mcforge/error.hpp"
#include "mcforge/evalharness.hpp"
#include "mcforge/mccreate.hpp"
#include "mcforge/mcmodels.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/rng.hpp"
#include "mcforge/synth.hpp"
#include "mcforge/textmetrics.hpp"
#include "mcforge/training.hpp"

#ifndef MCFORGE_VERSION
#define MCFORGE_VERSION "0.0.0"
#endif

namespace mcforge::cli {

namespace {

class Logger {
 public:
  void open(const std::string& path, bool quiet) {
    path_ = path;
    quiet_ = quiet;
    file_.open(path, std::ios::app);
  }
  const std::string& path() const { return path_; }

  void info(const std::string& msg) {
    write("info", msg);
    if (!quiet_) std::cerr << msg << '\n';
  }
  void detail(const std::string& msg) { write("debug", msg); }
  void error(const std::string& msg) { write("error", msg); }

 private:
  void write(const char* level, const std::string& msg) {
    if (!file_) return;
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", &tm);
    file_ << ts << " [" << level << "] " << msg << '\n';
    file_.flush();
  }

  std::string path_;
  bool quiet_ = false;
  std::ofstream file_;
};

Logger g_log;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Json effective_config(const Context& ctx) {
  Json cfg = preset(ctx.preset);
  std::string file = ctx.config_path;
  if (file.empty()) {
    if (const char* env = std::getenv("MCFORGE_CONFIG"); env && *env) file = env;
  }
  if (!file.empty()) merge_config(cfg, load_config_file(file));
  for (const auto& s : ctx.sets) apply_override(cfg, s);
  if (ctx.seed) cfg["seed"] = *ctx.seed;
  if (ctx.workers) cfg["workers"] = *ctx.workers;
  if (ctx.deterministic) cfg["deterministic"] = *ctx.deterministic;
  if (ctx.docs) cfg["synth"]["docs"] = *ctx.docs;
  if (ctx.dim) cfg["pv"]["dim"] = *ctx.dim;
  if (ctx.epochs) cfg["pv"]["epochs"] = *ctx.epochs;
  if (ctx.steps) cfg["train"]["steps"] = *ctx.steps;
  if (ctx.batch_size) cfg["train"]["batch_size"] = *ctx.batch_size;
  if (ctx.eval_every) cfg["train"]["eval_every"] = *ctx.eval_every;
  if (ctx.rouge_limit) cfg["train"]["rouge_limit"] = *ctx.rouge_limit;
  if (ctx.lambda_gen) cfg["model"]["lambda_gen"] = *ctx.lambda_gen;
  if (ctx.workers && *ctx.workers == 0) throw InvalidArgument("--workers must be >= 1");
  return cfg;
}

/// Provenance record written next to a primary output as <output>.run.json.
struct Run {
  std::string command;
  Json config;
  Json inputs = Json::object();
  Json result = Json::object();

  void input(const std::string& path) { inputs[path] = hash_file(path); }

  void finish(const Context& ctx, const std::string& output) const {
    Json j;
    j["command"] = command;
    j["version"] = MCFORGE_VERSION;
    j["argv"] = ctx.argv;
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a64(config.dump()));
    j["inputs"] = inputs;
    if (!output.empty()) j["output"] = {{"path", output}, {"hash", hash_file(output)}};
    j["result"] = result;
    const std::string text = j.dump(2) + "\n";
    if (!output.empty()) {
      write_text(output + ".run.json", text);
    }
    g_log.detail("provenance " + j.dump());
  }
};

Run begin(const Context& ctx, const std::string& command) {
  Run r{command, effective_config(ctx)};
  g_log.detail("effective config " + r.config.dump());
  return r;
}

Corpus load_corpus(const std::string& path) {
  auto r = ingest(path);
  if (r.skipped > 0) g_log.info("note: skipped " + std::to_string(r.skipped) + " malformed corpus lines");
  return std::move(r.corpus);
}

std::vector<Prediction> model_predictions(const ad::ParamStore<float>& params,
                                          const ModelConfig& cfg,
                                          std::span<const EncodedInstance> enc,
                                          std::size_t workers) {
  const auto scores = score_instances<float>(params, cfg, enc, 16, workers);
  std::vector<Prediction> preds;
  preds.reserve(enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    preds.push_back(Prediction{enc[i].id, predict_instance(scores[i]), scores[i]});
  }
  return preds;
}

AccuracyOptions accuracy_options(const Json& cfg) {
  AccuracyOptions o;
  o.errorbar_samples = cfg.at("eval").at("errorbar_samples").get<std::size_t>();
  o.errorbar_seed = derive_seed(global_seed(cfg), "errorbar");
  return o;
}

struct TrainedModel {
  ModelConfig cfg;
  Vocabulary vocab;
  TrainResult result;
};

TrainedModel fit(const McDataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
                 const std::string& pair_order) {
  TrainedModel m{mcfg, build_model_vocab(ds, mcfg.vocab_size), {}};
  const auto train_refs = ds.in_split(Split::kTrain);
  const auto dev_refs = ds.in_split(Split::kDev);
  if (train_refs.empty()) throw InvalidArgument("dataset has no train split");
  std::vector<EncodedInstance> train;
  TrainConfig t = tcfg;
  if (!pair_order.empty()) {
    if (mcfg.kind == ModelKind::kFfnn5) throw InvalidArgument("--pair-order needs a pair model (ffnn or hybrid)");
    McDataset train_only;
    for (const McInstance* inst : train_refs) train_only.instances.push_back(*inst);
    const PairOrder order = pair_order == "grouped" ? PairOrder::kGrouped : PairOrder::kShuffled;
    const auto pairs = export_pairs(train_only, order, derive_seed(tcfg.seed, "shuffle"));
    train = encode_pairs(pairs, m.vocab, mcfg);
    t.shuffle = false;
  } else {
    train = encode_instances(train_refs, m.vocab, mcfg);
  }
  const auto dev = encode_instances(dev_refs, m.vocab, mcfg);
  m.result = train_model(mcfg, train, dev, t, [](const MetricsRow& r) {
    if (std::isnan(r.dev_acc)) return;
    std::string line = "step " + std::to_string(r.step) + "  loss " + fmt("%.4f", r.train_loss) +
                       "  dev_acc " + fmt("%.4f", r.dev_acc);
    if (!std::isnan(r.rouge_l)) line += "  rouge_l " + fmt("%.4f", r.rouge_l);
    g_log.info(line);
  });
  return m;
}

double split_accuracy(const TrainedModel& m, const McDataset& ds, Split split, std::size_t workers) {
  const auto refs = ds.in_split(split);
  if (refs.empty()) return std::nan("");
  const auto enc = encode_instances(refs, m.vocab, m.cfg);
  return model_accuracy(m.result.best, m.cfg, enc, workers);
}

Json nullable(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
std::string csv_cell(double v) { return std::isnan(v) ? std::string() : fmt("%.6f", v); }

// ---- commands ----

int cmd_ingest(Context& ctx) {
  Run run = begin(ctx, "ingest");
  run.input(ctx.input);
  const IngestResult r = ingest(ctx.input, ctx.limit);
  write_corpus(r.corpus, ctx.output);
  for (std::size_t i = 0; i < std::min<std::size_t>(r.skip_log.size(), 50); ++i) {
    g_log.detail("skipped line " + std::to_string(r.skip_log[i].first) + ": " + r.skip_log[i].second);
  }
  run.result = {{"lines_read", r.lines_read}, {"documents", r.corpus.size()}, {"skipped", r.skipped}};
  std::cout << "documents " << r.corpus.size() << "  lines " << r.lines_read << "  skipped "
            << r.skipped << '\n';
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_synth(Context& ctx) {
  Run run = begin(ctx, "synth-corpus");
  const Corpus c = synth_corpus(synth_config(run.config));
  write_corpus(c, ctx.output);
  run.result = {{"documents", c.size()}};
  std::cout << "documents " << c.size() << '\n';
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_train_pv(Context& ctx) {
  if (ctx.lr) ctx.sets.push_back("pv.initial_lr=" + fmt("%.17g", *ctx.lr));
  Run run = begin(ctx, "train-pv");
  run.input(ctx.corpus);
  const Corpus corpus = load_corpus(ctx.corpus);
  const PvConfig cfg = pv_config(run.config);
  const auto t0 = std::chrono::steady_clock::now();
  const PvModel pv = train_pv(corpus, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_pv(pv, ctx.output);
  for (std::size_t e = 0; e < pv.epoch_loss.size(); ++e) {
    g_log.detail("epoch " + std::to_string(e + 1) + " loss " + fmt("%.6f", pv.epoch_loss[e]));
  }
  run.result = {{"documents", pv.num_docs()},
                {"vocab", pv.vocab.size()},
                {"final_epoch_loss", pv.epoch_loss.empty() ? Json(nullptr) : Json(pv.epoch_loss.back())},
                {"fingerprint", hex64(pv.fingerprint())}};
  std::cout << "titles " << pv.num_docs() << "  vocab " << pv.vocab.size() << "  final loss "
            << (pv.epoch_loss.empty() ? std::string("-") : fmt("%.4f", pv.epoch_loss.back()))
            << "  (" << fmt("%.1f", secs) << " s)\n";
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_build_dataset(Context& ctx) {
  Run run = begin(ctx, "build-dataset");
  const Variant variant = parse_variant(ctx.variant);
  const McCreateConfig mc = mccreate_config(run.config);
  run.input(ctx.corpus);
  const Corpus corpus = load_corpus(ctx.corpus);

  std::optional<PvModel> pv;
  if (!ctx.pv.empty()) {
    run.input(ctx.pv);
    pv = load_pv(ctx.pv);
  }
  auto pv_dataset = [&] {
    if (!pv) throw InvalidArgument("--pv is required to build the pv variant");
    return build_dataset(corpus, *pv, mc);
  };

  McDataset ds;
  McDataset base;
  if (variant == Variant::kPv) {
    ds = pv_dataset();
  } else {
    if (!ctx.base.empty()) {
      run.input(ctx.base);
      base = read_dataset(ctx.base);
    } else {
      base = pv_dataset();
    }
    const McDataset rnd = build_rnd_dataset(corpus, base, derive_seed(mc.seed, "rnd"), mc);
    ds = variant == Variant::kRnd ? rnd : combine(base, rnd, derive_seed(mc.seed, "combine"));
  }

  if (variant == Variant::kPv && !ctx.no_validate) {
    const ValidationReport v = validate_dataset(ds, corpus, *pv, mc);
    run.result["validated"] = {{"checked", v.checked}, {"passed", v.passed}};
    std::cout << "validator: " << v.passed << "/" << v.checked << " instances pass\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(v.failures.size(), 5); ++i) {
      std::cout << "  " << v.failures[i] << '\n';
    }
    if (!v.ok()) {
      write_dataset(ds, ctx.output);
      throw Error(std::to_string(v.failures.size()) + " instances failed validation");
    }
  }
  write_dataset(ds, ctx.output);
  const auto stats = dataset_stats(ds);
  std::cout << format_stats_table(stats);
  run.result["instances"] = ds.size();
  run.result["corpus_documents"] = corpus.size();
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_stats(Context& ctx) {
  Run run = begin(ctx, "stats");
  run.input(ctx.dataset);
  const McDataset ds = read_dataset(ctx.dataset);
  const auto stats = dataset_stats(ds);
  std::cout << format_stats_table(stats);
  Json rows = Json::object();
  for (const Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    const auto& st = stats[static_cast<std::size_t>(s)];
    rows[std::string(to_string(s))] = {{"instances", st.instances},
                                       {"avg_tokens_article", st.avg_article_tokens},
                                       {"avg_tokens_answer", st.avg_answer_tokens}};
  }
  run.result = rows;
  if (!ctx.output.empty()) write_text(ctx.output, rows.dump(2) + "\n");
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_eval_baselines(Context& ctx) {
  Run run = begin(ctx, "eval-baselines");
  run.input(ctx.dataset);
  run.input(ctx.pv);
  const McDataset ds = read_dataset(ctx.dataset);
  const PvModel pv = load_pv(ctx.pv);
  const AccuracyOptions ao = accuracy_options(run.config);
  const int infer_steps = run.config.at("eval").at("infer_steps").get<int>();
  const std::uint64_t seed = global_seed(run.config);
  const std::size_t w = workers(run.config);

  std::vector<BaselineRow> rows{{"Random", {}, {}}, {"BLEU", {}, {}}, {"PV", {}, {}}};
  for (const Split s : {Split::kDev, Split::kTest}) {
    const InstanceRefs refs = ds.in_split(s);
    if (refs.empty()) continue;
    const std::string tag(to_string(s));
    auto slot = [&](BaselineRow& r) -> std::optional<EvalReport>& {
      return s == Split::kDev ? r.dev : r.test;
    };
    slot(rows[0]) = accuracy(baseline_random(refs, derive_seed(seed, "random-baseline", tag)), refs, "Random", ao);
    slot(rows[1]) = accuracy(baseline_bleu(refs), refs, "BLEU", ao);
    slot(rows[2]) = accuracy(baseline_pv(refs, pv, infer_steps, w), refs, "PV", ao);
  }
  std::cout << format_results_table(rows);
  Json out = Json::array();
  for (const BaselineRow& r : rows) {
    Json row = {{"method", r.method}};
    row["dev"] = r.dev ? Json::parse(r.dev->to_json()) : Json(nullptr);
    row["test"] = r.test ? Json::parse(r.test->to_json()) : Json(nullptr);
    out.push_back(row);
  }
  run.result = {{"rows", out}};
  if (!ctx.output.empty()) write_text(ctx.output, Json{{"rows", out}}.dump(2) + "\n");
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_train_model(Context& ctx) {
  Run run = begin(ctx, "train-model");
  run.input(ctx.dataset);
  const ModelKind kind = parse_model_kind(ctx.model);
  const ModelConfig mcfg = model_config(run.config, kind);
  TrainConfig tcfg = train_config(run.config);
  if (ctx.lr) tcfg.learning_rate = *ctx.lr;
  if (!ctx.pair_order.empty() && ctx.pair_order != "grouped" && ctx.pair_order != "shuffled") {
    throw InvalidArgument("--pair-order must be grouped or shuffled");
  }
  const McDataset ds = read_dataset(ctx.dataset);
  g_log.info(std::string(to_string(kind)) + ": " + std::to_string(count_parameters(mcfg)) + " parameters");
  const TrainedModel m = fit(ds, mcfg, tcfg, ctx.pair_order);
  save_checkpoint(ctx.output, mcfg, m.vocab, m.result.best, m.result.best_step, m.result.best_dev_acc);
  const std::string metrics = ctx.metrics.empty() ? ctx.output + ".metrics.csv" : ctx.metrics;
  write_metrics_csv(metrics, m.result.log);
  run.result = {{"parameters", count_parameters(mcfg)},
                {"best_step", m.result.best_step},
                {"best_dev_acc", nullable(m.result.best_dev_acc)},
                {"metrics", metrics}};
  std::cout << "best step " << m.result.best_step << "  dev_acc "
            << csv_cell(m.result.best_dev_acc) << '\n';
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_eval_model(Context& ctx) {
  Run run = begin(ctx, "eval-model");
  run.input(ctx.checkpoint);
  run.input(ctx.dataset);
  const Checkpoint ck = load_checkpoint(ctx.checkpoint);
  const McDataset ds = read_dataset(ctx.dataset);
  const Split split = parse_split(ctx.split);
  const InstanceRefs refs = ds.in_split(split);
  if (refs.empty()) throw InvalidArgument("split " + ctx.split + " is empty");
  const auto enc = encode_instances(refs, ck.vocab, ck.config);
  const std::size_t w = workers(run.config);
  const EvalReport rep =
      accuracy(model_predictions(ck.params, ck.config, enc, w), refs,
               std::string(to_string(ck.config.kind)), accuracy_options(run.config));
  Json out = Json::parse(rep.to_json());
  std::cout << to_string(ck.config.kind) << " " << ctx.split << " accuracy "
            << fmt("%.4f", rep.accuracy) << " +- " << fmt("%.4f", rep.errorbar);
  if (ck.config.kind == ModelKind::kHybrid) {
    const std::size_t n = std::min(enc.size(), train_config(run.config).rouge_limit);
    const double r = generation_rouge(ck.params, ck.config, std::span(enc).first(n),
                                      ck.config.max_title_len, w);
    out["rouge_l"] = r;
    std::cout << "  rouge_l " << fmt("%.4f", r);
  }
  std::cout << '\n';
  run.result = out;
  if (!ctx.output.empty()) write_text(ctx.output, out.dump(2) + "\n");
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_sweep(Context& ctx) {
  Run run = begin(ctx, "sweep-lambda-gen");
  run.input(ctx.dataset);
  if (ctx.lambdas.empty()) throw InvalidArgument("give at least one lambda_gen value");
  const McDataset ds = read_dataset(ctx.dataset);
  const TrainConfig tcfg = train_config(run.config);
  const std::size_t w = workers(run.config);
  std::string csv = "lambda_gen,dev_acc,test_acc,rouge_l\n";
  for (const double lambda : ctx.lambdas) {
    ModelConfig mcfg = model_config(run.config, ModelKind::kHybrid);
    mcfg.lambda_gen = lambda;
    g_log.info("lambda_gen " + fmt("%g", lambda));
    const TrainedModel m = fit(ds, mcfg, tcfg, "");
    const auto dev = encode_instances(ds.in_split(Split::kDev), m.vocab, mcfg);
    const std::size_t n = std::min(dev.size(), tcfg.rouge_limit);
    const double rouge = n ? generation_rouge(m.result.best, mcfg, std::span(dev).first(n),
                                              mcfg.max_title_len, w)
                           : std::nan("");
    csv += fmt("%g", lambda) + "," + csv_cell(split_accuracy(m, ds, Split::kDev, w)) + "," +
           csv_cell(split_accuracy(m, ds, Split::kTest, w)) + "," + csv_cell(rouge) + "\n";
  }
  std::cout << csv;
  write_text(ctx.output, csv);
  run.finish(ctx, ctx.output);
  return 0;
}

int cmd_ablate(Context& ctx) {
  Run run = begin(ctx, "ablate");
  run.input(ctx.dataset);
  const McDataset ds = read_dataset(ctx.dataset);
  const TrainConfig tcfg = train_config(run.config);
  const std::size_t w = workers(run.config);
  std::string csv = "tied_embeddings,attention,parameters,dev_acc,test_acc\n";
  for (const bool tied : {true, false}) {
    for (const AttentionKind att : {AttentionKind::kBilinear, AttentionKind::kTanh}) {
      ModelConfig mcfg = model_config(run.config, ModelKind::kHybrid);
      mcfg.tied_embeddings = tied;
      mcfg.attention = att;
      g_log.info(std::string("tied=") + (tied ? "yes" : "no") + " attention=" +
                 std::string(to_string(att)));
      const TrainedModel m = fit(ds, mcfg, tcfg, "");
      csv += std::string(tied ? "true" : "false") + "," + std::string(to_string(att)) + "," +
             std::to_string(count_parameters(mcfg)) + "," +
             csv_cell(split_accuracy(m, ds, Split::kDev, w)) + "," +
             csv_cell(split_accuracy(m, ds, Split::kTest, w)) + "\n";
    }
  }
  std::cout << csv;
  write_text(ctx.output, csv);
  run.finish(ctx, ctx.output);
  return 0;
}

std::atomic<AnnotateServer*> g_server{nullptr};

int cmd_serve(Context& ctx) {
  Run run = begin(ctx, "serve-annotate");
  run.input(ctx.dataset);
  const McDataset ds = read_dataset(ctx.dataset);
  AnnotationStore store(ds, ctx.log.empty() ? "annotations.jsonl" : ctx.log);
  AnnotateServer server(store, {ctx.host, ctx.port, ctx.static_dir});
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (AnnotateServer* s = g_server.load()) s->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (AnnotateServer* s = g_server.load()) s->stop();
  });
  run.finish(ctx, "");
  std::cout << "serving " << ds.size() << " instances on http://" << ctx.host << ":" << ctx.port
            << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

int cmd_show_config(Context& ctx) {
  std::cout << effective_config(ctx).dump(2) << '\n';
  return 0;
}

}  // namespace

std::unique_ptr<CLI::App> build_app(Context& ctx) {
  auto app = std::make_unique<CLI::App>(
      "mcforge: multiple-choice reading-comprehension datasets from title/article corpora, "
      "baselines, and neural models.",
      "mcforge");
  app->require_subcommand(1);
  app->fallthrough();
  app->set_version_flag("--version", MCFORGE_VERSION, "Print the version and exit");
  app->add_option("-c,--config", ctx.config_path,
                  "JSON config file layered over the preset (default: $MCFORGE_CONFIG)");
  app->add_option("--preset", ctx.preset, "Built-in defaults: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app->add_option("--seed", ctx.seed, "Global seed for every random stream");
  app->add_option("-j,--workers", ctx.workers, "Worker threads");
  app->add_flag("--deterministic,!--no-deterministic", ctx.deterministic,
                "Force worker-count-independent outputs (default on)");
  app->add_option("--set", ctx.sets, "Override a config value: section.key=value (repeatable)");
  app->add_option("--log-file", ctx.log_path, "Append-only run log");
  app->add_flag("-q,--quiet", ctx.quiet, "Only print results, not progress");

  auto reg = [&](const char* name, const char* desc, int (*fn)(Context&)) {
    ctx.handlers[name] = fn;
    return app->add_subcommand(name, desc);
  };

  auto* s = reg("ingest", "Read a JSONL corpus ({id,title,article} per line), drop bad lines, write it normalized", cmd_ingest);
  s->add_option("-i,--input", ctx.input, "Raw JSONL corpus")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "Normalized corpus path")->required();
  s->add_option("--limit", ctx.limit, "Keep at most this many documents");

  s = reg("synth-corpus", "Generate the templated synthetic news corpus", cmd_synth);
  s->add_option("-o,--output", ctx.output, "Corpus path (JSONL)")->required();
  s->add_option("--docs", ctx.docs, "Number of documents (synth.docs)");

  s = reg("train-pv", "Train paragraph vectors on the corpus titles", cmd_train_pv);
  s->add_option("--corpus", ctx.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "PV model path")->required();
  s->add_option("--dim", ctx.dim, "Vector size (pv.dim)");
  s->add_option("--epochs", ctx.epochs, "Training epochs (pv.epochs)");
  s->add_option("--lr", ctx.lr, "Initial learning rate (pv.initial_lr)");

  s = reg("build-dataset", "Build the multiple-choice dataset: pv decoys, random decoys, or both combined", cmd_build_dataset);
  s->add_option("--corpus", ctx.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("--pv", ctx.pv, "PV model (needed unless --base is given for rnd/combined)")
      ->check(CLI::ExistingFile);
  s->add_option("--variant", ctx.variant, "pv, rnd or combined")
      ->check(CLI::IsMember({"pv", "rnd", "combined"}));
  s->add_option("--base", ctx.base, "Existing pv dataset to derive rnd/combined from")
      ->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "Dataset JSONL path")->required();
  s->add_flag("--no-validate", ctx.no_validate, "Skip the instance validator (pv variant)");

  s = reg("stats", "Instances and average article/answer lengths per split", cmd_stats);
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "Also write the numbers as JSON");

  s = reg("eval-baselines", "Random, BLEU and PV-cosine baselines on dev and test", cmd_eval_baselines);
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("--pv", ctx.pv, "PV model")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "Write the reports as JSON");

  s = reg("train-model", "Train a model and keep the checkpoint with the best dev accuracy", cmd_train_model);
  s->add_option("model", ctx.model, "ffnn, ffnn5 or hybrid")
      ->required()
      ->check(CLI::IsMember({"ffnn", "ffnn5", "hybrid"}));
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "Checkpoint path")->required();
  s->add_option("--metrics", ctx.metrics, "Metrics CSV (default: <output>.metrics.csv)");
  s->add_option("--steps", ctx.steps, "Training steps (train.steps)");
  s->add_option("--batch-size", ctx.batch_size, "Instances per step (train.batch_size)");
  s->add_option("--eval-every", ctx.eval_every, "Steps between dev evaluations (train.eval_every)");
  s->add_option("--lr", ctx.lr, "ADAGRAD learning rate (train.learning_rate)");
  s->add_option("--lambda-gen", ctx.lambda_gen, "Weight of the generation loss (model.lambda_gen)");
  s->add_option("--pair-order", ctx.pair_order,
                "Train on (title, article) pairs kept grouped by instance or globally shuffled")
      ->check(CLI::IsMember({"grouped", "shuffled"}));

  s = reg("eval-model", "Accuracy (and ROUGE-L for hybrid) of a checkpoint on a split", cmd_eval_model);
  s->add_option("--checkpoint", ctx.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("--split", ctx.split, "dev or test")->check(CLI::IsMember({"train", "dev", "test"}));
  s->add_option("--rouge-limit", ctx.rouge_limit, "Instances decoded for ROUGE-L (train.rouge_limit)");
  s->add_option("-o,--output", ctx.output, "Write the report as JSON");

  s = reg("sweep-lambda-gen", "Train the hybrid model once per lambda_gen value; CSV of dev/test accuracy and ROUGE-L", cmd_sweep);
  s->add_option("lambdas", ctx.lambdas, "lambda_gen values")->required();
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "CSV path")->required();
  s->add_option("--steps", ctx.steps, "Training steps per run (train.steps)");
  s->add_option("--rouge-limit", ctx.rouge_limit, "Dev instances decoded for ROUGE-L (train.rouge_limit)");

  s = reg("ablate", "Hybrid model with tied/untied embeddings x bilinear/tanh attention", cmd_ablate);
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("-o,--output", ctx.output, "CSV path")->required();
  s->add_option("--steps", ctx.steps, "Training steps per run (train.steps)");

  s = reg("serve-annotate", "HTTP annotation service for human evaluation", cmd_serve);
  s->add_option("--dataset", ctx.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("--log", ctx.log, "Annotation record log (default: annotations.jsonl)");
  s->add_option("--host", ctx.host, "Listen address");
  s->add_option("-p,--port", ctx.port, "Listen port")->check(CLI::Range(1, 65535));
  s->add_option("--static", ctx.static_dir, "Directory of UI files served at /")
      ->check(CLI::ExistingDirectory);

  reg("show-config", "Print the effective configuration (preset < file < flags)", cmd_show_config);
  return app;
}

int run(int argc, char** argv) {
  Context ctx;
  ctx.argv.assign(argv + 1, argv + argc);
  auto app = build_app(ctx);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app->exit(e);
    return code == 0 ? 0 : 1;
  }
  g_log.open(ctx.log_path, ctx.quiet);
  std::string name;
  for (const CLI::App* sub : app->get_subcommands()) name = sub->get_name();
  g_log.detail("mcforge " + name + " " + Json(ctx.argv).dump());
  try {
    return ctx.handlers.at(name)(ctx);
  } catch (const InvalidArgument& e) {
    g_log.error(e.what());
    std::cerr << "mcforge " << name << ": error: " << e.what() << " (log: " << g_log.path() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    g_log.error(e.what());
    std::cerr << "mcforge " << name << ": error: " << e.what() << " (log: " << g_log.path() << ")\n";
    return 2;
  }
}

}  // namespace mcforge::cli
