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

#include "mcforge/synth.hpp"

#include <array>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mcforge/error.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

namespace {

constexpr std::array<std::string_view, 24> kOnsets = {
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t",
    "v", "z", "br", "dr", "kr", "st", "tr", "gl", "sh", "ch", "pl", "th"};
constexpr std::array<std::string_view, 10> kVowels = {"a", "e", "i", "o", "u",
                                                      "ai", "ou", "ea", "io", "y"};
constexpr std::array<std::string_view, 8> kCodas = {"", "", "n", "r", "l", "s", "x", "m"};

constexpr std::array<std::string_view, 12> kDays = {
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
    "sunday", "overnight", "today", "yesterday", "earlier", "late"};

constexpr std::array<std::string_view, 6> kPrepositions = {"in", "at", "near", "across", "outside", "inside"};
constexpr std::array<std::string_view, 8> kSources = {"officials", "police", "minister", "sources",
                                                      "report", "envoy", "ministry", "spokesman"};

constexpr std::array<std::string_view, 30> kCommon = {
    "government", "officials", "minister", "police",  "report",   "week",
    "country",    "city",      "people",   "state",   "plan",     "talks",
    "leaders",    "group",     "security", "members", "capital",  "region",
    "agency",     "support",   "crisis",   "deal",    "vote",     "court",
    "market",     "workers",   "company",  "office",  "national", "public"};

constexpr std::array<std::string_view, 14> kFunction = {
    "the", "a", "of", "to", "and", "for", "with", "after", "at", "by", "as", "from", "its", "their"};

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  // A fresh pseudo-word that was never produced before.
  std::string fresh(std::size_t syllables) {
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[uniform_index(rng_, kOnsets.size())];
        w += kVowels[uniform_index(rng_, kVowels.size())];
        if (s + 1 == syllables) w += kCodas[uniform_index(rng_, kCodas.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

struct Topic {
  std::vector<std::string> people;
  std::vector<std::string> orgs;
  std::vector<std::vector<std::string>> phrases;
  // Each content word has one paraphrase partner within its topic.
  std::unordered_map<std::string, std::string> partner;
  std::vector<std::string> nouns;
  std::vector<std::string> verbs;
  std::vector<std::string> adjectives;
};

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

template <typename C>
const auto& pick(const C& c, Rng& rng) {
  return c[uniform_index(rng, c.size())];
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

Corpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.docs == 0 || cfg.topics == 0) throw InvalidArgument("synth_corpus: empty configuration");
  if (cfg.nouns_per_topic < 2 || cfg.verbs_per_topic < 1 || cfg.adjectives_per_topic < 1) {
    throw InvalidArgument("synth_corpus: topics need >= 2 nouns, >= 1 verb, >= 1 adjective");
  }
  Rng rng(derive_seed(cfg.seed, "synth"));
  WordMaker words(rng);

  std::vector<Topic> topics(cfg.topics);
  for (auto& t : topics) {
    for (std::size_t i = 0; i < cfg.nouns_per_topic; ++i) t.nouns.push_back(words.fresh(2));
    for (std::size_t i = 0; i < cfg.verbs_per_topic; ++i) t.verbs.push_back(words.fresh(2) + "s");
    for (std::size_t i = 0; i < cfg.adjectives_per_topic; ++i) {
      t.adjectives.push_back(words.fresh(2) + "ic");
    }
    auto add_partners = [&](std::vector<std::string>& list, const std::string& suffix) {
      const std::size_t n = list.size();
      for (std::size_t i = 0; i < n; ++i) {
        std::string other = words.fresh(2) + suffix;
        t.partner[list[i]] = other;
        t.partner[other] = list[i];
        list.push_back(std::move(other));
      }
    };
    add_partners(t.nouns, "");
    add_partners(t.verbs, "s");
    add_partners(t.adjectives, "ic");
    for (std::size_t i = 0; i < cfg.people_per_topic; ++i) t.people.push_back(capitalize(words.fresh(3)));
    for (std::size_t i = 0; i < cfg.orgs_per_topic; ++i) t.orgs.push_back(capitalize(words.fresh(2)) + "corp");
    // Recurring four-word catchphrases, echoed in titles and article bodies.
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t a = uniform_index(rng, t.nouns.size());
      std::size_t b = uniform_index(rng, t.nouns.size() - 1);
      if (b >= a) ++b;
      t.phrases.push_back({pick(t.adjectives, rng), t.nouns[a], "and", t.nouns[b]});
    }
  }
  // Places are shared by about two documents each: rare enough to drop out
  // of a min-count-5 title vocabulary most of the time.
  std::vector<std::string> places(std::max<std::size_t>(1, cfg.docs / 2));
  for (auto& p : places) p = capitalize(words.fresh(3));

  Corpus corpus;
  corpus.source_tag = "synthetic";
  corpus.docs.reserve(cfg.docs);
  const int id_width = static_cast<int>(std::to_string(cfg.docs).size());
  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const Topic& topic = topics[uniform_index(rng, topics.size())];
    // Recurring newsmakers of the topic, or a one-off name.
    const std::string person = uniform_unit(rng) < cfg.recurring_names && !topic.people.empty()
                                   ? pick(topic.people, rng)
                                   : capitalize(words.fresh(3));
    const std::string org = uniform_unit(rng) < cfg.recurring_names && !topic.orgs.empty()
                                ? pick(topic.orgs, rng)
                                : capitalize(words.fresh(2)) + "corp";
    const std::string& place = pick(places, rng);
    const std::string& verb = pick(topic.verbs, rng);
    const std::string& adj = pick(topic.adjectives, rng);
    const std::size_t n1 = uniform_index(rng, topic.nouns.size());
    std::size_t n2 = uniform_index(rng, topic.nouns.size() - 1);
    if (n2 >= n1) ++n2;
    const std::string& noun1 = topic.nouns[n1];
    const std::string& noun2 = topic.nouns[n2];
    const std::string day(pick(kDays, rng));
    const std::string prep(pick(kPrepositions, rng));
    const std::string source(pick(kSources, rng));

    const auto& phrase = pick(topic.phrases, rng);

    std::vector<std::string> title;
    std::vector<std::string> lead;
    switch (uniform_index(rng, 7)) {
      case 0:
        title = {person, verb, adj, noun1, noun2, prep, place};
        lead = {person, verb, "the", adj, noun1, noun2, prep, place, "on", day, ",", org, "said", "."};
        break;
      case 1:
        title = {place, noun1, verb, noun2, ":", person};
        lead = {"the", place, noun1, verb, "a", noun2, ",", person, "told", org, "on", day, "."};
        break;
      case 2:
        title = {adj, noun1, verb, person, ",", org, source};
        lead = {"an", adj, noun1, verb, person, "on", day, ",", org, source, "said", "."};
        break;
      case 3:
        title = {person, ",", org, verb, noun1, "over", noun2};
        lead = {person, "and", org, verb, "the", noun1, "over", "a", noun2, "in", place, "."};
        break;
      case 4:
        title = {noun1, noun2, verb, prep, place, ":", source};
        lead = {"a", noun1, noun2, verb, prep, place, day, ",", source, "from", org, "said", "."};
        break;
      case 5:
        title = {person, verb, phrase[0], phrase[1], phrase[2], phrase[3]};
        lead = {person, verb, "the", phrase[0], phrase[1], phrase[2], phrase[3], day, ",", org, "said", "."};
        break;
      default:
        title = {phrase[0], phrase[1], phrase[2], phrase[3], verb, prep, place};
        lead = {"the", phrase[0], phrase[1], phrase[2], phrase[3], verb, prep, place, day, "."};
        break;
    }
    for (auto& w : lead) {
      auto it = topic.partner.find(w);
      if (it != topic.partner.end() && uniform_unit(rng) < cfg.paraphrase) w = it->second;
    }
    if (uniform_unit(rng) < cfg.verbatim_lead) {
      lead = title;
      for (const char* w : {"on", "", "the", "agency", "said", "."}) {
        lead.push_back(*w ? std::string(w) : std::string(day));
      }
    }

    std::vector<std::string> article = lead;
    {
      const auto& echo = pick(topic.phrases, rng);
      const std::vector<std::string> sent = {"the", "latest", "turn", "in", "the", echo[0], echo[1],
                                             echo[2], echo[3], "story", "drew", "attention", "."};
      article.insert(article.end(), sent.begin(), sent.end());
    }
    for (std::size_t s = 0; s < cfg.article_sentences; ++s) {
      const std::string& a = pick(topic.nouns, rng);
      const std::string& b = pick(topic.nouns, rng);
      const std::string& v = pick(topic.verbs, rng);
      const std::string& j = pick(topic.adjectives, rng);
      const std::string& someone = topic.people.empty() ? person : pick(topic.people, rng);
      const std::string& body_org = topic.orgs.empty() ? org : pick(topic.orgs, rng);
      std::vector<std::string> sent;
      switch (uniform_index(rng, 6)) {
        case 0:
          sent = {"the", j, a, std::string(pick(kFunction, rng)), std::string(pick(kCommon, rng)), v,
                  std::string(pick(kFunction, rng)), b, ",", "according", "to", body_org, "."};
          break;
        case 1:
          sent = {someone, "said", "the", a, "would", "affect", std::string(pick(kCommon, rng)),
                  "and", b, std::string(pick(kCommon, rng)), "."};
          break;
        case 2:
          sent = {std::string(pick(kCommon, rng)), "in", place, v, "new", a, "measures",
                  "after", "the", b, "."};
          break;
        case 3:
          sent = {"critics", "of", "the", j, b, "argue", "that", a, std::string(pick(kCommon, rng)),
                  v, "too", "slowly", "."};
          break;
        case 4:
          sent = {"a", "spokesman", "for", body_org, "declined", "to", "comment", "on", "the", a,
                  "."};
          break;
        default:
          sent = {"the", std::string(pick(kCommon, rng)), std::string(pick(kCommon, rng)), v, a,
                  "and", b, "for", "the", "second", "time", "this", "year", "."};
          break;
      }
      article.insert(article.end(), sent.begin(), sent.end());
    }

    char id[64];
    std::snprintf(id, sizeof id, "%s%0*zu", cfg.id_prefix.c_str(), id_width, d);
    corpus.docs.push_back(Document{id, join(title), join(article)});
  }
  return corpus;
}

}  // namespace mcforge
