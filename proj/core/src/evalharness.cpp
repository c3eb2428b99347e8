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

#include "mcforge/evalharness.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mcforge/error.hpp"
#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

int argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("argmax over an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<int>(best);
}

InstanceRefs all_instances(const McDataset& ds) {
  InstanceRefs out;
  out.reserve(ds.size());
  for (const auto& i : ds.instances) out.push_back(&i);
  return out;
}

std::vector<Prediction> baseline_random(const InstanceRefs& instances, std::uint64_t seed) {
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const auto* inst : instances) {
    Rng rng(derive_seed(seed, "random-baseline", inst->id));
    const std::size_t k = inst->options.size();
    Prediction p{inst->id, 0, std::vector<double>(k, 0.0)};
    p.chosen_index = static_cast<int>(uniform_index(rng, k));
    p.option_scores[p.chosen_index] = 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> baseline_bleu(const InstanceRefs& instances, const BleuConfig& cfg) {
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const auto* inst : instances) {
    Prediction p{inst->id, 0, {}};
    for (const auto& o : inst->options) p.option_scores.push_back(bleu(o.tokens, inst->article_tokens, cfg));
    p.chosen_index = argmax_lowest(p.option_scores);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> baseline_pv(const InstanceRefs& instances, const PvModel& pv,
                                    int infer_steps, std::size_t workers) {
  std::vector<Prediction> out(instances.size());
  parallel_chunks(instances.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const McInstance& inst = *instances[i];
      const auto article = infer_vector(pv, inst.article_tokens, infer_steps);
      Prediction p{inst.id, 0, {}};
      for (const auto& o : inst.options) {
        const auto option = infer_vector(pv, o.tokens, infer_steps);
        p.option_scores.push_back(cosine(article.vector, option.vector));
      }
      p.chosen_index = argmax_lowest(p.option_scores);
      out[i] = std::move(p);
    }
  });
  return out;
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHard: return "hard";
  }
  return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "medium") return Difficulty::kMedium;
  if (s == "hard") return Difficulty::kHard;
  return std::nullopt;
}

bool operator==(const DifficultyCell& a, const DifficultyCell& b) {
  return a.n == b.n && a.share == b.share && a.accuracy == b.accuracy;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method_tag;
  j["n"] = n;
  j["correct"] = correct;
  j["accuracy"] = accuracy;
  j["errorbar"] = errorbar;
  j["prior"] = prior;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [k, c] : per_difficulty) {
    per[k] = {{"n", c.n}, {"share", c.share}, {"accuracy", c.accuracy}};
  }
  j["per_difficulty"] = per;
  return j.dump();
}

EvalReport EvalReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.method_tag = j.at("method");
  r.n = j.at("n");
  r.correct = j.at("correct");
  r.accuracy = j.at("accuracy");
  r.errorbar = j.at("errorbar");
  r.prior = j.at("prior");
  for (const auto& [k, v] : j.at("per_difficulty").items()) {
    r.per_difficulty[k] = DifficultyCell{v.at("n"), v.at("share"), v.at("accuracy")};
  }
  return r;
}

EvalReport accuracy(const std::vector<Prediction>& preds, const InstanceRefs& golds,
                    std::string method_tag, const AccuracyOptions& opts) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) by_id.emplace(p.instance_id, &p);
  EvalReport r;
  r.method_tag = std::move(method_tag);
  r.n = golds.size();
  std::vector<std::size_t> class_correct, class_total;
  std::map<std::string, std::pair<std::size_t, std::size_t>> diff;
  for (const auto* inst : golds) {
    auto it = by_id.find(inst->id);
    if (it == by_id.end()) throw InvalidArgument("no prediction for instance " + inst->id);
    const bool ok = it->second->chosen_index == inst->gold_index;
    r.correct += ok;
    const auto cls = static_cast<std::size_t>(inst->gold_index);
    if (cls >= class_total.size()) {
      class_total.resize(cls + 1, 0);
      class_correct.resize(cls + 1, 0);
    }
    class_total[cls]++;
    class_correct[cls] += ok;
    if (opts.difficulties) {
      auto d = opts.difficulties->find(inst->id);
      if (d != opts.difficulties->end()) {
        auto& cell = diff[std::string(to_string(d->second))];
        cell.first++;
        cell.second += ok;
      }
    }
  }
  r.accuracy = r.n ? static_cast<double>(r.correct) / static_cast<double>(r.n) : 0.0;
  std::vector<std::size_t> c, t;
  for (std::size_t k = 0; k < class_total.size(); ++k) {
    if (class_total[k]) {
      c.push_back(class_correct[k]);
      t.push_back(class_total[k]);
    }
  }
  if (!t.empty()) r.errorbar = balanced_acc_errorbar(c, t, opts.errorbar_samples, opts.errorbar_seed);
  std::size_t labelled = 0;
  for (const auto& [k, v] : diff) labelled += v.first;
  for (const auto& [k, v] : diff) {
    r.per_difficulty[k] = DifficultyCell{
        v.first, static_cast<double>(v.first) / static_cast<double>(labelled),
        static_cast<double>(v.second) / static_cast<double>(v.first)};
  }
  return r;
}

double balanced_acc_errorbar(std::span<const std::size_t> per_class_correct,
                             std::span<const std::size_t> per_class_total, std::size_t samples,
                             std::uint64_t seed) {
  if (samples < 1000) throw InvalidArgument("balanced_acc_errorbar: need >= 1000 samples");
  if (per_class_correct.size() != per_class_total.size() || per_class_total.empty()) {
    throw InvalidArgument("balanced_acc_errorbar: class count mismatch");
  }
  for (std::size_t k = 0; k < per_class_total.size(); ++k) {
    if (per_class_total[k] == 0) throw InvalidArgument("balanced_acc_errorbar: empty class");
    if (per_class_correct[k] > per_class_total[k]) {
      throw InvalidArgument("balanced_acc_errorbar: correct exceeds total");
    }
  }
  Rng rng(derive_seed(seed, "balanced-acc"));
  const std::size_t classes = per_class_total.size();
  std::vector<std::gamma_distribution<double>> hit, miss;
  for (std::size_t k = 0; k < classes; ++k) {
    hit.emplace_back(1.0 + static_cast<double>(per_class_correct[k]), 1.0);
    miss.emplace_back(1.0 + static_cast<double>(per_class_total[k] - per_class_correct[k]), 1.0);
  }
  // Welford running variance.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 1; s <= samples; ++s) {
    double acc = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double x = hit[k](rng);
      const double y = miss[k](rng);
      acc += x / (x + y);
    }
    acc /= static_cast<double>(classes);
    const double delta = acc - mean;
    mean += delta / static_cast<double>(s);
    m2 += delta * (acc - mean);
  }
  return std::sqrt(m2 / static_cast<double>(samples - 1));
}

namespace {

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v;
  return os.str();
}

}  // namespace

std::string format_results_table(const std::vector<BaselineRow>& rows) {
  std::ostringstream os;
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  os << std::left << std::setw(static_cast<int>(width) + 2) << "Method" << std::right
     << std::setw(8) << "Dev" << std::setw(16) << "Test" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << r.method << std::right
       << std::setw(8) << (r.dev ? pct(r.dev->accuracy) : "-");
    std::string test = "-";
    if (r.test) test = pct(r.test->accuracy) + " +/- " + pct(r.test->errorbar);
    os << std::setw(16) << test << '\n';
  }
  return os.str();
}

std::string format_difficulty_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "Method" << std::right;
  for (const char* h : {"Easy%", "Medium%", "Hard%", "Easy", "Medium", "Hard", "Overall"}) {
    os << std::setw(9) << h;
  }
  os << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(22) << r.method_tag << std::right;
    for (const char* k : {"easy", "medium", "hard"}) {
      auto it = r.per_difficulty.find(k);
      os << std::setw(9) << (it == r.per_difficulty.end() ? "-" : pct(it->second.share));
    }
    for (const char* k : {"easy", "medium", "hard"}) {
      auto it = r.per_difficulty.find(k);
      os << std::setw(9) << (it == r.per_difficulty.end() ? "-" : pct(it->second.accuracy));
    }
    os << std::setw(9) << pct(r.accuracy) << '\n';
  }
  return os.str();
}

}  // namespace mcforge
