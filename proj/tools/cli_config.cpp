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

#include "cli_config.hpp"

#include <fstream>
#include <sstream>

#include "mcforge/error.hpp"

namespace mcforge::cli {

namespace {

Json model_section(const ModelConfig& m) {
  Json j = Json::parse(m.to_json());
  j.erase("kind");
  return j;
}

Json common(const ModelConfig& model) {
  const SynthConfig s;
  const McCreateConfig mc;
  const TrainConfig t;
  return Json{
      {"seed", 1},
      {"workers", 1},
      {"deterministic", true},
      {"synth",
       {{"docs", 25000},
        {"topics", s.topics},
        {"nouns_per_topic", s.nouns_per_topic},
        {"verbs_per_topic", s.verbs_per_topic},
        {"adjectives_per_topic", s.adjectives_per_topic},
        {"people_per_topic", s.people_per_topic},
        {"orgs_per_topic", s.orgs_per_topic},
        {"recurring_names", s.recurring_names},
        {"article_sentences", s.article_sentences},
        {"verbatim_lead", s.verbatim_lead},
        {"paraphrase", s.paraphrase}}},
      {"pv", Json::object()},
      {"mccreate",
       {{"N", mc.neighborhood},
        {"nr_decoys", mc.nr_decoys},
        {"lambda_e", mc.lambda_e},
        {"lambda_s", mc.lambda_s},
        {"L", mc.surface_guard},
        {"split", {mc.split.train, mc.split.dev, mc.split.test}},
        {"cross_split_filter", mc.cross_split_filter}}},
      {"model", model_section(model)},
      {"train",
       {{"steps", t.steps},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"clip_norm", t.clip_norm},
        {"eval_every", t.eval_every},
        {"dev_limit", t.dev_limit},
        {"rouge_limit", t.rouge_limit},
        {"shard_size", t.shard_size},
        {"shuffle", t.shuffle}}},
      {"eval", {{"errorbar_samples", 20000}, {"infer_steps", 20}}}};
}

Json pv_section(int dim, int epochs, double lr) {
  const PvConfig p;
  return Json{{"dim", dim},
              {"epochs", epochs},
              {"min_count", p.min_count},
              {"max_types", p.max_types},
              {"negative_samples", p.negative_samples},
              {"initial_lr", lr},
              {"final_lr", p.final_lr},
              {"infer_steps", p.infer_steps}};
}

template <typename V>
V get(const Json& section, const char* key) {
  if (!section.contains(key)) throw InvalidArgument(std::string("config: missing key ") + key);
  try {
    return section.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config: bad value for ") + key + ": " +
                          section.at(key).dump());
  }
}

}  // namespace

Json preset(std::string_view name) {
  if (name == "desk") {
    Json j = common(desk_model_config(ModelKind::kHybrid));
    j["pv"] = pv_section(64, 100, 0.05);
    return j;
  }
  if (name == "paper") {
    Json j = common(ModelConfig{});
    const PvConfig p;
    j["pv"] = pv_section(p.dim, p.epochs, p.initial_lr);
    j["train"]["steps"] = 1000000;
    j["train"]["eval_every"] = 10000;
    return j;
  }
  throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

void merge_config(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw InvalidArgument("config: " + (where.empty() ? "root" : where) + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw InvalidArgument("config: unknown key " + path);
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, it.value(), path);
    } else {
      slot = it.value();
    }
  }
}

void apply_override(Json& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InvalidArgument("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
    parts.push_back(rest.substr(0, dot));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  merge_config(cfg, patch);
}

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw InvalidArgument("config file is not valid JSON: " + path.string());
  return j;
}

std::uint64_t global_seed(const Json& cfg) { return get<std::uint64_t>(cfg, "seed"); }
std::size_t workers(const Json& cfg) { return get<std::size_t>(cfg, "workers"); }
bool deterministic(const Json& cfg) { return get<bool>(cfg, "deterministic"); }

SynthConfig synth_config(const Json& cfg) {
  const Json& s = cfg.at("synth");
  SynthConfig c;
  c.docs = get<std::size_t>(s, "docs");
  c.topics = get<std::size_t>(s, "topics");
  c.nouns_per_topic = get<std::size_t>(s, "nouns_per_topic");
  c.verbs_per_topic = get<std::size_t>(s, "verbs_per_topic");
  c.adjectives_per_topic = get<std::size_t>(s, "adjectives_per_topic");
  c.people_per_topic = get<std::size_t>(s, "people_per_topic");
  c.orgs_per_topic = get<std::size_t>(s, "orgs_per_topic");
  c.recurring_names = get<double>(s, "recurring_names");
  c.article_sentences = get<std::size_t>(s, "article_sentences");
  c.verbatim_lead = get<double>(s, "verbatim_lead");
  c.paraphrase = get<double>(s, "paraphrase");
  c.seed = global_seed(cfg);
  return c;
}

PvConfig pv_config(const Json& cfg) {
  const Json& s = cfg.at("pv");
  PvConfig c;
  c.dim = get<int>(s, "dim");
  c.epochs = get<int>(s, "epochs");
  c.min_count = get<std::uint64_t>(s, "min_count");
  c.max_types = get<std::size_t>(s, "max_types");
  c.negative_samples = get<int>(s, "negative_samples");
  c.initial_lr = get<double>(s, "initial_lr");
  c.final_lr = get<double>(s, "final_lr");
  c.infer_steps = get<int>(s, "infer_steps");
  c.seed = global_seed(cfg);
  // Hogwild updates are the only worker-count-dependent step in the pipeline.
  c.workers = deterministic(cfg) ? 1 : static_cast<int>(workers(cfg));
  c.validate();
  return c;
}

McCreateConfig mccreate_config(const Json& cfg) {
  const Json& s = cfg.at("mccreate");
  McCreateConfig c;
  c.neighborhood = get<std::size_t>(s, "N");
  c.nr_decoys = get<std::size_t>(s, "nr_decoys");
  c.lambda_e = get<double>(s, "lambda_e");
  c.lambda_s = get<double>(s, "lambda_s");
  c.surface_guard = get<double>(s, "L");
  const auto split = get<std::vector<double>>(s, "split");
  if (split.size() != 3) throw InvalidArgument("config: mccreate.split needs three ratios");
  c.split = {split[0], split[1], split[2]};
  c.cross_split_filter = get<bool>(s, "cross_split_filter");
  c.seed = global_seed(cfg);
  c.workers = workers(cfg);
  c.validate();
  return c;
}

ModelConfig model_config(const Json& cfg, ModelKind kind) {
  Json j = cfg.at("model");
  j["kind"] = std::string(to_string(kind));
  try {
    return ModelConfig::from_json(j.dump());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: bad model section: ") + e.what());
  }
}

TrainConfig train_config(const Json& cfg) {
  Json j = cfg.at("train");
  j["seed"] = global_seed(cfg);
  TrainConfig c;
  try {
    c = TrainConfig::from_json(j.dump());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: bad train section: ") + e.what());
  }
  c.workers = workers(cfg);
  return c;
}

}  // namespace mcforge::cli
