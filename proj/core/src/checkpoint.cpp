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


#include "mcforge/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "mcforge/binio.hpp"
#include "mcforge/error.hpp"

namespace mcforge {

namespace {
constexpr std::string_view kMagic = "MCFCK001";
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const Vocabulary& vocab, const ad::ParamStore<float>& params,
                     std::size_t step, double dev_accuracy) {
  nlohmann::ordered_json h;
  h["format"] = "mcforge-checkpoint";
  h["version"] = 1;
  h["config"] = nlohmann::json::parse(config.to_json());
  h["step"] = step;
  h["dev_accuracy"] = std::isfinite(dev_accuracy) ? nlohmann::json(dev_accuracy) : nlohmann::json();
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (TokenId i = 0; i < vocab.size(); ++i) {
    tokens.push_back(vocab.token(i));
    counts.push_back(vocab.count(i));
  }
  h["vocab_tokens"] = tokens;
  h["vocab_counts"] = counts;
  h["vocab_max_types"] = vocab.max_types();
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.at(i);
    tensors.push_back({{"name", p.name}, {"shape", {p.shape.rows, p.shape.cols}}});
  }
  h["tensors"] = tensors;

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + tmp.string());
    binio::write_header(out, kMagic, h.dump());
    for (std::size_t i = 0; i < params.size(); ++i) {
      binio::write_f32<float>(out, params.at(i).value);
    }
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  const auto h = nlohmann::json::parse(binio::read_header(in, kMagic));
  if (h.at("version") != 1) throw IoError("unsupported checkpoint version");
  Checkpoint ck;
  ck.config = ModelConfig::from_json(h.at("config").dump());
  ck.step = h.at("step").get<std::size_t>();
  ck.dev_accuracy = h.at("dev_accuracy").is_null() ? std::nan("") : h.at("dev_accuracy").get<double>();
  const auto tokens = h.at("vocab_tokens").get<std::vector<std::string>>();
  const auto counts = h.at("vocab_counts").get<std::vector<std::uint64_t>>();
  std::unordered_map<std::string, std::uint64_t> count_map;
  for (std::size_t i = Vocabulary::kNumSentinels; i < tokens.size(); ++i) count_map[tokens[i]] = counts[i];
  ck.vocab = Vocabulary::from_counts(count_map, 1, h.at("vocab_max_types").get<std::size_t>());
  if (ck.vocab.size() != tokens.size()) throw IoError("checkpoint vocabulary does not round-trip");
  for (TokenId i = 0; i < tokens.size(); ++i) {
    if (ck.vocab.token(i) != tokens[i]) throw IoError("checkpoint vocabulary order mismatch");
  }
  for (const auto& t : h.at("tensors")) {
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw IoError("checkpoint tensor shape must be 2-D");
    const std::size_t idx = ck.params.add(t.at("name").get<std::string>(), {shape[0], shape[1]});
    binio::read_f32<float>(in, ck.params.at(idx).value);
  }
  const auto layout = parameter_layout(ck.config);
  if (layout.size() != ck.params.size()) throw IoError("checkpoint tensors do not match its config");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != ck.params.at(i).name || layout[i].second != ck.params.at(i).shape) {
      throw IoError("checkpoint tensor '" + ck.params.at(i).name + "' does not match its config");
    }
  }
  return ck;
}

}  // namespace mcforge
