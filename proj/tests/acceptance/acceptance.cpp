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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "decoy_oracle.hpp"
#include "cli_app.hpp"
#include "cli_config.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "metric_oracles.hpp"
#include "mcforge/checkpoint.hpp"
#include "mcforge/corpus.hpp"
#include "mcforge/evalharness.hpp"
#include "mcforge/mccreate.hpp"
#include "mcforge/mcmodels.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/training.hpp"

namespace fs = std::filesystem;
using namespace mcforge;
using cli::Json;

namespace {

// Pinned thresholds.
constexpr double kPipelineSeconds = 600.0;
constexpr std::size_t kMinDev = 2000;
constexpr double kRandomCenter = 0.20, kRandomBand = 0.02;
constexpr double kBleuMargin = 0.10, kPvMargin = 0.05;
constexpr double kBleuTol = 1e-9, kRougeTol = 1e-9, kErrorbarRel = 0.10;
constexpr double kOpTol = 1e-6, kModelTol = 1e-3;
constexpr double kGradSeconds = 300.0;
constexpr std::size_t kOverfitSet = 50, kOverfitSteps = 2000;
constexpr std::size_t kRougeSteps = 600;
constexpr double kLambda0DevRouge = 0.1;
constexpr double kTiedRatio = 0.55;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Runs the command line in-process with its stdout captured.
int mcforge(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "mcforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  if (out) *out = captured.str();
  return code;
}

class Workspace {
 public:
  Workspace(fs::path dir, std::size_t docs) : dir_(std::move(dir)), docs_(docs) {
    fs::create_directories(dir_);
  }

  std::vector<std::string> global(const fs::path& run_dir) const {
    return {"--preset", "desk", "--log-file", (run_dir / "mcforge.log").string(), "-q",
            "--set", "synth.docs=" + std::to_string(docs_)};
  }

  /// synth-corpus, train-pv and build-dataset into `name`; returns seconds.
  double pipeline(const std::string& name) {
    const fs::path d = dir_ / name;
    fs::remove_all(d);
    fs::create_directories(d);
    const auto g = global(d);
    auto with = [&](std::vector<std::string> extra) {
      std::vector<std::string> a = g;
      a.insert(a.end(), extra.begin(), extra.end());
      if (mcforge(a) != 0) throw std::runtime_error("mcforge " + extra[0] + " failed (log: " + g[3] + ")");
    };
    const auto t0 = Clock::now();
    with({"synth-corpus", "-o", (d / "corpus.jsonl").string()});
    with({"train-pv", "--corpus", (d / "corpus.jsonl").string(), "-o", (d / "pv.bin").string()});
    with({"build-dataset", "--corpus", (d / "corpus.jsonl").string(), "--pv", (d / "pv.bin").string(),
          "-o", (d / "dataset.jsonl").string()});
    return seconds_since(t0);
  }

  fs::path run1() {
    if (!run1_secs_) run1_secs_ = pipeline("run1");
    return dir_ / "run1";
  }
  double run1_seconds() {
    run1();
    return *run1_secs_;
  }
  const McDataset& dataset() {
    if (!ds_) ds_ = read_dataset(run1() / "dataset.jsonl");
    return *ds_;
  }
  const PvModel& pv() {
    if (!pv_) pv_ = load_pv(run1() / "pv.bin");
    return *pv_;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::size_t docs_;
  std::optional<double> run1_secs_;
  std::optional<McDataset> ds_;
  std::optional<PvModel> pv_;
};

Outcome pipeline_correctness(Workspace& ws) {
  const double secs = ws.run1_seconds();
  const fs::path a = ws.run1();
  const McDataset& ds = ws.dataset();
  const Corpus corpus = ingest(a / "corpus.jsonl").corpus;
  const ValidationReport v = validate_dataset(ds, corpus, ws.pv(), cli::mccreate_config(cli::preset("desk")));
  ws.pipeline("run2");
  const fs::path b = ws.dir() / "run2";
  bool identical = true;
  for (const char* f : {"corpus.jsonl", "pv.bin", "dataset.jsonl"}) identical = identical && slurp(a / f) == slurp(b / f);
  const bool all_valid = v.checked == ds.size() && v.passed == v.checked && v.checked > 0;
  std::ostringstream d;
  d << "validator " << v.passed << "/" << v.checked << " instances, rerun "
    << (identical ? "byte-identical" : "DIFFERS") << ", " << fmt("%.1f", secs) << " s (< "
    << kPipelineSeconds << " s)";
  if (!v.failures.empty()) d << ", first failure: " << v.failures.front();
  return {all_valid && identical && secs < kPipelineSeconds, d.str()};
}

Outcome decoy_oracle(Workspace&) {
  McCreateConfig n10;
  n10.neighborhood = 10;
  McCreateConfig other;
  other.lambda_s = 0.8;
  other.seed = 4;
  std::size_t instances = 0, diffs = 0;
  std::string first;
  for (const McCreateConfig& cfg : {n10, other}) {
    const auto want = oracle::select_decoys(fixtures::micro_corpus(), fixtures::micro_pv(), cfg);
    const auto got = build_dataset(fixtures::micro_corpus(), fixtures::micro_pv(), cfg);
    const auto d = oracle::compare(got, want);
    instances += want.size();
    diffs += d.size();
    if (!d.empty() && first.empty()) first = d.front();
  }
  std::string detail = std::to_string(instances) + " instances over 2 configs, " +
                       std::to_string(diffs) + " differences";
  if (!first.empty()) detail += " (" + first + ")";
  return {diffs == 0 && instances > 20, detail};
}

Outcome baseline_ordering(Workspace& ws) {
  const fs::path out = ws.dir() / "baselines.json";
  auto args = ws.global(ws.dir());
  for (const std::string& s : {std::string("eval-baselines"), std::string("--dataset"),
                               (ws.run1() / "dataset.jsonl").string(), std::string("--pv"),
                               (ws.run1() / "pv.bin").string(), std::string("-o"), out.string()}) {
    args.push_back(s);
  }
  if (mcforge(args) != 0) return {false, "eval-baselines failed"};
  const Json j = Json::parse(slurp(out));
  std::map<std::string, Json> dev;
  for (const Json& row : j["rows"]) dev[row["method"]] = row["dev"];
  const std::size_t n = dev["Random"]["n"];
  const double rnd = dev["Random"]["accuracy"], bleu = dev["BLEU"]["accuracy"], pv = dev["PV"]["accuracy"];
  const bool n_ok = n >= kMinDev;
  const bool rnd_ok = std::abs(rnd - kRandomCenter) <= kRandomBand;
  const bool bleu_ok = bleu >= rnd + kBleuMargin;
  const bool pv_ok = pv <= rnd + kPvMargin;
  auto mark = [](bool ok) { return ok ? "ok" : "NO"; };
  std::ostringstream d;
  d << "dev n=" << n << " [" << mark(n_ok) << "]; Random " << fmt("%.1f", 100 * rnd) << "% [" << mark(rnd_ok)
    << "]; BLEU " << fmt("%.1f", 100 * bleu) << "% >= Random+10 [" << mark(bleu_ok) << "]; PV "
    << fmt("%.1f", 100 * pv) << "% <= Random+5 [" << mark(pv_ok) << "]";
  return {n_ok && rnd_ok && bleu_ok && pv_ok, d.str()};
}

Outcome metric_oracles(Workspace&) {
  double bleu_err = 0, rouge_err = 0;
  const auto bc = oracle::bleu_hand_cases();
  for (const auto& c : bc) bleu_err = std::max(bleu_err, std::abs(c.got - c.want));
  const auto rc = oracle::rouge_random_cases();
  for (const auto& c : rc) rouge_err = std::max(rouge_err, std::abs(c.got - c.want));
  const std::vector<std::size_t> correct{30, 12, 45, 7, 20};
  const std::vector<std::size_t> total{50, 40, 60, 30, 35};
  const double got = balanced_acc_errorbar(correct, total, 20000, 5);
  const double mc = oracle::balanced_acc_sd_mc(correct, total, 40000, 99);
  const double rel = std::abs(got - mc) / mc;
  std::ostringstream d;
  d << bc.size() << " BLEU cases max err " << fmt("%.1e", bleu_err) << "; " << rc.size()
    << " ROUGE-L cases max err " << fmt("%.1e", rouge_err) << "; error bar vs Monte Carlo "
    << fmt("%.1f", 100 * rel) << "% rel";
  return {bc.size() == 20 && rc.size() == 20 && bleu_err <= kBleuTol && rouge_err <= kRougeTol &&
              rel <= kErrorbarRel,
          d.str()};
}

Outcome gradient_suite(Workspace&) {
  const auto t0 = Clock::now();
  double op_worst = 0, model_worst = 0;
  std::string op_name, model_name;
  std::size_t checks = 0;
  for (const auto& c : gradcheck::op_cases()) {
    for (std::uint64_t seed : gradcheck::kSeeds) {
      const double e = gradcheck::check_op(c.fn, c.shapes, seed, c.lo, c.hi);
      ++checks;
      if (e > op_worst) op_worst = e, op_name = c.name;
    }
  }
  for (const auto& v : gradcheck::model_variants()) {
    for (std::uint64_t seed : gradcheck::kSeeds) {
      const double e = gradcheck::model_grad_error(v.cfg, seed);
      ++checks;
      if (e > model_worst) model_worst = e, model_name = v.name;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << checks << " checks over 5 seeds; ops max abs err " << fmt("%.1e", op_worst) << " (" << op_name
    << "); whole-model max rel err " << fmt("%.1e", model_worst) << " (" << model_name << "); "
    << fmt("%.1f", secs) << " s";
  return {op_worst < kOpTol && model_worst < kModelTol && secs < kGradSeconds, d.str()};
}

Outcome learning_sanity(Workspace& ws) {
  const McDataset& ds = ws.dataset();
  auto train_refs = ds.in_split(Split::kTrain);
  train_refs.resize(kOverfitSet);
  const auto dev_refs = ds.in_split(Split::kDev);
  const Json cfg = cli::preset("desk");
  const TrainConfig base = cli::train_config(cfg);

  std::ostringstream d;
  bool pass = true;
  auto overfit = [&](ModelKind kind) {
    const ModelConfig mc = cli::model_config(cfg, kind);
    const Vocabulary vocab = build_model_vocab(ds, mc.vocab_size);
    const auto train = encode_instances(train_refs, vocab, mc);
    std::size_t collisions = 0;
    for (const auto& e : train) {
      for (std::size_t k = 0; k < e.options.size(); ++k) {
        if (k != e.gold && e.options[k] == e.options[e.gold]) {
          ++collisions;
          break;
        }
      }
    }
    if (kind == ModelKind::kFfnn) d << collisions << " gold/decoy encoding collisions; ";
    TrainConfig t = base;
    t.steps = kOverfitSteps;
    t.eval_every = 25;
    t.stop_at_dev_acc = 1.0;
    t.rouge_limit = 0;
    const TrainResult r = train_model(mc, train, train, t);
    const double acc = model_accuracy(r.best, mc, train);
    d << to_string(kind) << " train acc " << fmt("%.0f", 100 * acc) << "% at step " << r.best_step << "; ";
    pass = pass && acc == 1.0 && r.best_step <= kOverfitSteps;
  };
  overfit(ModelKind::kFfnn);
  overfit(ModelKind::kHybrid);

  ModelConfig mc = cli::model_config(cfg, ModelKind::kHybrid);
  const Vocabulary vocab = build_model_vocab(ds, mc.vocab_size);
  const auto train = encode_instances(train_refs, vocab, mc);
  auto dev = encode_instances(dev_refs, vocab, mc);
  dev.resize(std::min<std::size_t>(dev.size(), 200));
  std::vector<double> train_rouge;
  double dev_rouge0 = 0;
  for (double lambda : {0.0, 1.0}) {
    mc.lambda_gen = lambda;
    TrainConfig t = base;
    t.steps = kRougeSteps;
    t.eval_every = kRougeSteps;
    t.rouge_limit = 0;
    const TrainResult r = train_model(mc, train, {}, t);
    train_rouge.push_back(generation_rouge(r.last, mc, train, mc.max_title_len));
    if (lambda == 0.0) dev_rouge0 = generation_rouge(r.last, mc, dev, mc.max_title_len);
  }
  const bool rises = train_rouge[1] > train_rouge[0];
  d << "train ROUGE-L at " << kRougeSteps << " steps: lambda_gen 0 -> " << fmt("%.3f", train_rouge[0])
    << ", 1 -> " << fmt("%.3f", train_rouge[1]) << "; lambda_gen 0 dev ROUGE-L "
    << fmt("%.3f", dev_rouge0) << " (< " << kLambda0DevRouge << ")";
  return {pass && rises && dev_rouge0 < kLambda0DevRouge, d.str()};
}

Outcome tied_ratio(Workspace&) {
  ModelConfig tied;
  ModelConfig untied;
  untied.tied_embeddings = false;
  const auto a = count_parameters(tied), b = count_parameters(untied);
  const double ratio = static_cast<double>(a) / static_cast<double>(b);
  return {ratio < kTiedRatio, std::to_string(a) + " / " + std::to_string(b) + " parameters = " +
                                  fmt("%.3f", ratio) + " (< " + fmt("%.2f", kTiedRatio) + ")"};
}

Outcome shuffling_harness(Workspace& ws) {
  const McDataset& ds = ws.dataset();
  const auto grouped = export_pairs(ds, PairOrder::kGrouped, 7);
  const auto shuffled = export_pairs(ds, PairOrder::kShuffled, 7);
  using Key = std::tuple<std::string, int, int>;
  auto keys = [](const std::vector<PairExample>& v) {
    std::vector<Key> k;
    for (const auto& p : v) k.emplace_back(p.instance_id, p.option_index, p.label);
    std::sort(k.begin(), k.end());
    return k;
  };
  const bool same = keys(grouped) == keys(shuffled);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < grouped.size(); ++i) {
    moved += grouped[i].instance_id != shuffled[i].instance_id || grouped[i].option_index != shuffled[i].option_index;
  }
  std::ostringstream d;
  d << grouped.size() << " pairs, multisets " << (same ? "equal" : "DIFFER") << ", "
    << fmt("%.0f", 100.0 * moved / std::max<std::size_t>(1, grouped.size())) << "% reordered";
  bool ran = true;
  for (const char* order : {"grouped", "shuffled"}) {
    const fs::path ckpt = ws.dir() / (std::string("pairs_") + order + ".ckpt");
    auto args = ws.global(ws.dir());
    for (const std::string& s : {std::string("train-model"), std::string("ffnn"), std::string("--dataset"),
                                 (ws.run1() / "dataset.jsonl").string(), std::string("--pair-order"),
                                 std::string(order), std::string("--steps"), std::string("300"),
                                 std::string("--eval-every"), std::string("100"), std::string("-o"),
                                 ckpt.string()}) {
      args.push_back(s);
    }
    std::string out;
    const bool ok = mcforge(args) == 0 && fs::exists(ckpt);
    std::string eval_out;
    auto eargs = ws.global(ws.dir());
    for (const std::string& s : {std::string("eval-model"), std::string("--checkpoint"), ckpt.string(),
                                 std::string("--dataset"), (ws.run1() / "dataset.jsonl").string(),
                                 std::string("--split"), std::string("test")}) {
      eargs.push_back(s);
    }
    const bool eval_ok = ok && mcforge(eargs, &eval_out) == 0;
    double acc = std::nan("");
    if (eval_ok) {
      const Checkpoint ck = load_checkpoint(ckpt);
      acc = ck.dev_accuracy;
    }
    d << "; " << order << " run " << (eval_ok ? "ok" : "FAILED") << " (dev acc " << fmt("%.3f", acc) << ")";
    ran = ran && eval_ok;
  }
  return {same && moved > 0 && ran, d.str()};
}

struct Criterion {
  std::string key;
  std::function<Outcome(Workspace&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance run: one PASS/FAIL line per criterion", "mcforge_acceptance");
  std::string workdir = (fs::temp_directory_path() / "mcforge_acceptance").string();
  std::size_t docs = 25000;
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "Scratch directory for pipeline artifacts");
  app.add_option("--docs", docs, "Synthetic corpus size for the pipeline criteria");
  app.add_option("--only", only, "Run only these criteria (by key)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"pipeline-correctness", pipeline_correctness},
      {"decoy-selection-oracle", decoy_oracle},
      {"baseline-ordering", baseline_ordering},
      {"metric-oracles", metric_oracles},
      {"gradient-suite", gradient_suite},
      {"learning-sanity", learning_sanity},
      {"tied-embedding-ratio", tied_ratio},
      {"shuffling-harness", shuffling_harness},
  };

  Workspace ws(workdir, docs);
  int failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.key) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn(ws);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.key << ": " << o.detail << "  ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  std::cout << ran - failed << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
