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

#pragma once

#include <cstddef>
#include <cstdint>

#include "mcforge/corpus.hpp"

namespace mcforge {

/// Templated news-like corpus with topical structure. Each document belongs
/// to one topic; titles mix topic words with per-document names (rare, so
/// they fall below typical PV min-counts) and the article leads with a
/// restatement of the headline followed by topical filler.
struct SynthConfig {
  std::size_t docs = 20000;
  std::size_t topics = 200;
  std::size_t nouns_per_topic = 10;
  std::size_t verbs_per_topic = 5;
  std::size_t adjectives_per_topic = 4;
  std::size_t people_per_topic = 6;
  std::size_t orgs_per_topic = 3;
  // Probability that a headline names one of its topic's recurring people
  // or organizations rather than a one-off name.
  double recurring_names = 0.7;
  std::size_t article_sentences = 7;
  // Probability that the lead sentence quotes the headline verbatim.
  double verbatim_lead = 0.3;
  // Otherwise each topic word of the lead is swapped for its paraphrase
  // partner with this probability.
  double paraphrase = 0.7;
  std::uint64_t seed = 7;
  std::string id_prefix = "doc";
};

Corpus synth_corpus(const SynthConfig& cfg);

}  // namespace mcforge
