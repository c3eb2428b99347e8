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

#include "mcforge/mccreate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mcforge/error.hpp"
#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

namespace {

constexpr std::string_view kTokenizerTag = "ascii-lower+unicode-ws+punct-split/v1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t corpus_fingerprint(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& d : corpus.docs) {
    h = fnv1a64(d.id, h);
    h = fnv1a64(d.title, h);
    h = fnv1a64(d.article, h);
  }
  return h;
}

// Interned titles and indexed articles for repeated scoring.
struct ScoringContext {
  ScoringContext(const Corpus& corpus, const PvModel& pv) : corpus(corpus), pv(pv) {
    const std::size_t n = corpus.size();
    title_tokens.resize(n);
    title_ids.resize(n);
    articles.resize(n);
    pv_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& d = corpus.docs[i];
      title_tokens[i] = tokenize(d.title);
      title_ids[i] = interner.intern_all(title_tokens[i]);
      articles[i] = IndexedReference(interner.intern_all(tokenize(d.article)));
      pv_rows[i] = pv.row_of(d.id);
      index.emplace(d.id, i);
    }
  }

  double score(std::size_t cand, std::size_t target, const McCreateConfig& cfg) const {
    const double bleu_title = bleu(title_ids[cand], title_ids[target], cfg.bleu);
    if (bleu_title >= cfg.surface_guard) return 0.0;
    const double cos = cosine(pv.doc_vector(pv_rows[cand]), pv.doc_vector(pv_rows[target]));
    const double bleu_article = bleu(title_ids[cand], articles[target], cfg.bleu);
    return combine_score(cos, bleu_title, bleu_article, cfg);
  }

  std::size_t doc_of(std::string_view id) const {
    auto it = index.find(std::string(id));
    if (it == index.end()) throw InvalidArgument("id not in corpus: " + std::string(id));
    return it->second;
  }

  const Corpus& corpus;
  const PvModel& pv;
  TokenInterner interner;
  std::vector<std::vector<std::string>> title_tokens;
  std::vector<std::vector<TokenId>> title_ids;
  std::vector<IndexedReference> articles;
  std::vector<std::size_t> pv_rows;
  std::unordered_map<std::string, std::size_t> index;
};

McOption make_option(const Document& d) { return McOption{d.title, tokenize(d.title)}; }

// Shuffles [gold, decoys...] and records where each landed.
void place_options(McInstance& inst, McOption gold, std::vector<McOption> decoys, Rng& rng) {
  const std::size_t k = decoys.size() + 1;
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  shuffle_range(order.begin(), order.end(), rng);
  inst.options.assign(k, {});
  inst.decoy_positions.assign(decoys.size(), 0);
  for (std::size_t pos = 0; pos < k; ++pos) {
    const int src = order[pos];
    if (src == 0) {
      inst.options[pos] = gold;
      inst.gold_index = static_cast<int>(pos);
    } else {
      inst.options[pos] = decoys[src - 1];
      inst.decoy_positions[src - 1] = static_cast<int>(pos);
    }
  }
}

void sort_by_id(McDataset& ds) {
  std::sort(ds.instances.begin(), ds.instances.end(),
            [](const McInstance& a, const McInstance& b) { return a.id < b.id; });
}

std::string provenance_json(const McCreateConfig& cfg, const Corpus& corpus, const PvModel* pv,
                            std::string_view variant, std::size_t n, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["variant"] = variant;
  j["config"] = nlohmann::json::parse(cfg.to_json());
  j["seed"] = seed;
  j["tokenizer"] = kTokenizerTag;
  j["corpus_source"] = corpus.source_tag;
  j["corpus_docs"] = corpus.size();
  j["corpus_fingerprint"] = hex64(corpus_fingerprint(corpus));
  if (pv) j["pv_fingerprint"] = hex64(pv->fingerprint());
  j["instances"] = n;
  return j.dump(2);
}

void drop_cross_split_leaks(McDataset& ds, const McCreateConfig& cfg) {
  TokenInterner interner;
  std::vector<std::vector<TokenId>> train_titles;
  std::vector<std::vector<TokenId>> gold(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& inst = ds.instances[i];
    gold[i] = interner.intern_all(inst.options[inst.gold_index].tokens);
    if (inst.split == Split::kTrain) train_titles.push_back(gold[i]);
  }
  std::vector<McInstance> kept;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& inst = ds.instances[i];
    bool leak = false;
    if (inst.split != Split::kTrain) {
      for (const auto& t : train_titles) {
        if (bleu(gold[i], t, cfg.bleu) >= cfg.surface_guard) {
          leak = true;
          break;
        }
      }
    }
    if (!leak) kept.push_back(std::move(inst));
  }
  ds.instances = std::move(kept);
}

}  // namespace

void SplitRatios::validate() const {
  if (train < 0 || dev < 0 || test < 0) throw InvalidArgument("split ratios must be >= 0");
  if (std::abs(train + dev + test - 1.0) > 1e-9) {
    throw InvalidArgument("split ratios must sum to 1");
  }
}

void McCreateConfig::validate() const {
  if (nr_decoys < 1) throw InvalidArgument("nr_decoys must be >= 1");
  if (neighborhood < nr_decoys) throw InvalidArgument("N must be >= nr_decoys");
  if (!(surface_guard > 0.0 && surface_guard <= 1.0)) throw InvalidArgument("L must be in (0, 1]");
  if (lambda_s < 0.0 || lambda_s > 1.0) throw InvalidArgument("lambda_s must be in [0, 1]");
  split.validate();
  bleu.validate();
}

std::string McCreateConfig::to_json() const {
  nlohmann::ordered_json j;
  j["N"] = neighborhood;
  j["nr_decoys"] = nr_decoys;
  j["lambda_e"] = lambda_e;
  j["lambda_s"] = lambda_s;
  j["L"] = surface_guard;
  j["seed"] = seed;
  j["split"] = {split.train, split.dev, split.test};
  j["bleu_max_order"] = bleu.max_order;
  j["bleu_brevity_penalty_fixed_to_one"] = bleu.brevity_penalty_fixed_to_one;
  j["bleu_smoothing"] = "none";
  j["cross_split_filter"] = cross_split_filter;
  return j.dump();
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kPv: return "pv";
    case Variant::kRnd: return "rnd";
    case Variant::kCombined: return "combined";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw InvalidArgument("unknown split: " + std::string(s));
}

Variant parse_variant(std::string_view s) {
  if (s == "pv") return Variant::kPv;
  if (s == "rnd") return Variant::kRnd;
  if (s == "combined") return Variant::kCombined;
  throw InvalidArgument("unknown variant: " + std::string(s));
}

std::vector<const McInstance*> McDataset::in_split(Split s) const {
  std::vector<const McInstance*> out;
  for (const auto& i : instances) {
    if (i.split == s) out.push_back(&i);
  }
  return out;
}

double combine_score(double pv_cosine, double bleu_title, double bleu_article,
                     const McCreateConfig& cfg) {
  const double s = cfg.lambda_e * pv_cosine + cfg.lambda_s * bleu_title +
                   (1.0 - cfg.lambda_s) * bleu_article;
  return std::max(0.0, s);
}

double score(const Document& candidate, const Document& target, const PvModel& pv,
             const McCreateConfig& cfg) {
  const auto cand_tokens = tokenize(candidate.title);
  const auto target_tokens = tokenize(target.title);
  const double bleu_title = bleu(cand_tokens, target_tokens, cfg.bleu);
  // Lookups first so unknown titles fail even when the guard fires.
  const auto cand_vec = pv.doc_vector(candidate.id);
  const auto target_vec = pv.doc_vector(target.id);
  if (bleu_title >= cfg.surface_guard) return 0.0;
  const double bleu_article = bleu(cand_tokens, tokenize(target.article), cfg.bleu);
  return combine_score(cosine(cand_vec, target_vec), bleu_title, bleu_article, cfg);
}

McDataset build_dataset(const Corpus& corpus, const PvModel& pv, const McCreateConfig& cfg) {
  cfg.validate();
  const ScoringContext ctx(corpus, pv);
  const std::size_t n = corpus.size();
  const auto knn = all_neighbors(pv, cfg.neighborhood, cfg.workers);
  std::vector<std::size_t> doc_of_row(pv.num_docs(), SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) doc_of_row[ctx.pv_rows[i]] = i;

  std::vector<std::optional<McInstance>> emitted(n);
  parallel_chunks(n, cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      struct Scored {
        double score;
        std::size_t doc;
      };
      std::vector<Scored> accepted;
      for (std::uint32_t row : knn[ctx.pv_rows[t]]) {
        const std::size_t cand = doc_of_row[row];
        if (cand == SIZE_MAX) continue;  // title not part of this corpus
        const double s = ctx.score(cand, t, cfg);
        if (s > 0.0) accepted.push_back({s, cand});
      }
      if (accepted.size() < cfg.nr_decoys) continue;
      std::sort(accepted.begin(), accepted.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return corpus.docs[a.doc].id < corpus.docs[b.doc].id;
      });
      std::vector<Scored> decoys;
      for (const auto& a : accepted) {
        const bool repeat = std::any_of(decoys.begin(), decoys.end(), [&](const Scored& d) {
          return ctx.title_tokens[d.doc] == ctx.title_tokens[a.doc];
        });
        if (repeat) continue;
        decoys.push_back(a);
        if (decoys.size() == cfg.nr_decoys) break;
      }
      if (decoys.size() < cfg.nr_decoys) continue;

      const Document& doc = corpus.docs[t];
      McInstance inst;
      inst.id = doc.id;
      inst.article = doc.article;
      inst.article_tokens = tokenize(doc.article);
      inst.variant = Variant::kPv;
      std::vector<McOption> decoy_options;
      for (const auto& d : decoys) {
        inst.decoy_scores.push_back(d.score);
        inst.decoy_ids.push_back(corpus.docs[d.doc].id);
        decoy_options.push_back(make_option(corpus.docs[d.doc]));
      }
      Rng rng(derive_seed(cfg.seed, "shuffle", doc.id));
      place_options(inst, make_option(doc), std::move(decoy_options), rng);
      emitted[t] = std::move(inst);
    }
  });

  McDataset ds;
  for (auto& e : emitted) {
    if (e) ds.instances.push_back(std::move(*e));
  }
  sort_by_id(ds);
  assign_splits(ds, cfg.split, cfg.seed);
  if (cfg.cross_split_filter) drop_cross_split_leaks(ds, cfg);
  ds.provenance = provenance_json(cfg, corpus, &pv, "pv", ds.size(), cfg.seed);
  return ds;
}

McDataset build_rnd_dataset(const Corpus& corpus, const McDataset& base, std::uint64_t seed,
                            const McCreateConfig& cfg) {
  const std::size_t k = cfg.nr_decoys;
  if (corpus.size() < k + 1) {
    throw InvalidArgument("build_rnd_dataset: corpus too small to sample " + std::to_string(k) +
                          " random decoys");
  }
  std::vector<std::vector<std::string>> titles(corpus.size());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    titles[i] = tokenize(corpus.docs[i].title);
    index.emplace(corpus.docs[i].id, i);
  }
  McDataset out;
  out.instances.resize(base.size());
  parallel_chunks(base.size(), cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const McInstance& src = base.instances[b];
      const auto& gold_tokens = src.options.at(src.gold_index).tokens;
      auto gold_it = index.find(src.id);
      const std::size_t gold_doc = gold_it == index.end() ? SIZE_MAX : gold_it->second;
      Rng rng(derive_seed(seed, "rnd", src.id));
      std::vector<std::size_t> chosen;
      const std::size_t max_draws = 1000 * (k + 1) + corpus.size();
      for (std::size_t draw = 0; chosen.size() < k; ++draw) {
        if (draw >= max_draws) {
          throw Error("build_rnd_dataset: cannot find " + std::to_string(k) +
                      " admissible random decoys for " + src.id);
        }
        const std::size_t c = uniform_index(rng, corpus.size());
        if (c == gold_doc || titles[c] == gold_tokens) continue;
        if (std::any_of(chosen.begin(), chosen.end(),
                        [&](std::size_t o) { return o == c || titles[o] == titles[c]; })) {
          continue;
        }
        if (bleu(titles[c], gold_tokens, cfg.bleu) >= cfg.surface_guard) continue;
        chosen.push_back(c);
      }
      McInstance inst;
      inst.id = src.id;
      inst.article = src.article;
      inst.article_tokens = src.article_tokens;
      inst.split = src.split;
      inst.variant = Variant::kRnd;
      std::vector<McOption> decoys;
      for (std::size_t c : chosen) {
        inst.decoy_ids.push_back(corpus.docs[c].id);
        decoys.push_back(McOption{corpus.docs[c].title, titles[c]});
      }
      place_options(inst, src.options.at(src.gold_index), std::move(decoys), rng);
      out.instances[b] = std::move(inst);
    }
  });
  sort_by_id(out);
  out.provenance = provenance_json(cfg, corpus, nullptr, "rnd", out.size(), seed);
  return out;
}

McDataset combine(const McDataset& base, const McDataset& rnd, std::uint64_t seed) {
  std::unordered_map<std::string, const McInstance*> rnd_by_id;
  for (const auto& r : rnd.instances) rnd_by_id.emplace(r.id, &r);
  if (rnd_by_id.size() != base.size()) {
    throw InvalidArgument("combine: datasets hold different instance ids");
  }
  McDataset out;
  for (const auto& b : base.instances) {
    auto it = rnd_by_id.find(b.id);
    if (it == rnd_by_id.end()) throw InvalidArgument("combine: id missing from rnd: " + b.id);
    const McInstance& r = *it->second;
    if (r.options.at(r.gold_index).text != b.options.at(b.gold_index).text) {
      throw InvalidArgument("combine: gold mismatch for " + b.id);
    }
    McInstance inst;
    inst.id = b.id;
    inst.article = b.article;
    inst.article_tokens = b.article_tokens;
    inst.split = b.split;
    inst.variant = Variant::kCombined;
    inst.decoy_scores = b.decoy_scores;
    std::vector<McOption> decoys;
    for (const auto* src : {&b, &r}) {
      for (std::size_t d = 0; d < src->decoy_positions.size(); ++d) {
        decoys.push_back(src->options.at(src->decoy_positions[d]));
        inst.decoy_ids.push_back(src->decoy_ids.at(d));
      }
    }
    Rng rng(derive_seed(seed, "combine", b.id));
    place_options(inst, b.options.at(b.gold_index), std::move(decoys), rng);
    out.instances.push_back(std::move(inst));
  }
  sort_by_id(out);
  nlohmann::ordered_json p;
  p["variant"] = "combined";
  p["seed"] = seed;
  p["base"] = nlohmann::json::parse(base.provenance.empty() ? "{}" : base.provenance);
  p["rnd"] = nlohmann::json::parse(rnd.provenance.empty() ? "{}" : rnd.provenance);
  out.provenance = p.dump(2);
  return out;
}

namespace {

std::vector<std::size_t> hash_rank(const std::vector<std::string>& ids, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(ids.size());
  const std::uint64_t s = derive_seed(seed, "split");
  for (std::size_t i = 0; i < ids.size(); ++i) keyed[i] = {mix64(fnv1a64(ids[i], s)), i};
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : ids[a.second] < ids[b.second];
  });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t r = 0; r < keyed.size(); ++r) rank[keyed[r].second] = r;
  return rank;
}

Split split_of_rank(std::size_t rank, std::size_t n, const SplitRatios& ratios) {
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_dev = std::min(
      n - std::min(n, n_train),
      static_cast<std::size_t>(std::llround(ratios.dev * static_cast<double>(n))));
  if (rank < n_train) return Split::kTrain;
  if (rank < n_train + n_dev) return Split::kDev;
  return Split::kTest;
}

}  // namespace

void assign_splits(McDataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<std::string> ids;
  ids.reserve(ds.size());
  for (const auto& i : ds.instances) ids.push_back(i.id);
  const auto rank = hash_rank(ids, seed);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ds.instances[i].split = split_of_rank(rank[i], ds.size(), ratios);
  }
}

Split split_for(std::string_view id, const std::vector<std::string>& all_ids,
                const SplitRatios& ratios, std::uint64_t seed) {
  const auto rank = hash_rank(all_ids, seed);
  for (std::size_t i = 0; i < all_ids.size(); ++i) {
    if (all_ids[i] == id) return split_of_rank(rank[i], all_ids.size(), ratios);
  }
  throw InvalidArgument("split_for: id not in id list: " + std::string(id));
}

std::vector<PairExample> export_pairs(const McDataset& ds, PairOrder order, std::uint64_t seed) {
  if (ds.instances.empty()) throw InvalidArgument("export_pairs: dataset is empty");
  std::vector<PairExample> pairs;
  for (const auto& inst : ds.instances) {
    for (std::size_t j = 0; j < inst.options.size(); ++j) {
      pairs.push_back(PairExample{inst.id, static_cast<int>(j), &inst.options[j], &inst,
                                  static_cast<int>(j) == inst.gold_index ? 1 : 0});
    }
  }
  if (order == PairOrder::kShuffled) {
    Rng rng(derive_seed(seed, "pairs"));
    shuffle_range(pairs.begin(), pairs.end(), rng);
  }
  return pairs;
}

ValidationReport validate_dataset(const McDataset& ds, const Corpus& corpus, const PvModel& pv,
                                  const McCreateConfig& cfg, double score_tolerance) {
  const ScoringContext ctx(corpus, pv);
  ValidationReport report;
  std::unordered_set<std::string> ids;
  std::vector<std::string> all_ids;
  for (const auto& inst : ds.instances) all_ids.push_back(inst.id);
  const auto rank = hash_rank(all_ids, cfg.seed);
  for (std::size_t idx = 0; idx < ds.size(); ++idx) {
    const auto& inst = ds.instances[idx];
    ++report.checked;
    std::vector<std::string> errs;
    auto fail = [&](const std::string& what) { errs.push_back(inst.id + ": " + what); };
    if (!ids.insert(inst.id).second) fail("duplicate instance id");
    const std::size_t expected_options =
        inst.variant == Variant::kCombined ? 2 * cfg.nr_decoys + 1 : cfg.nr_decoys + 1;
    if (inst.options.size() != expected_options) {
      fail("expected " + std::to_string(expected_options) + " options, got " +
           std::to_string(inst.options.size()));
    }
    if (inst.gold_index < 0 || static_cast<std::size_t>(inst.gold_index) >= inst.options.size()) {
      fail("gold index out of range");
      report.failures.insert(report.failures.end(), errs.begin(), errs.end());
      continue;
    }
    if (inst.decoy_ids.size() != inst.options.size() - 1 ||
        inst.decoy_positions.size() != inst.decoy_ids.size()) {
      fail("decoy bookkeeping does not cover every non-gold option");
      report.failures.insert(report.failures.end(), errs.begin(), errs.end());
      continue;
    }
    std::vector<int> seen_pos(inst.options.size(), 0);
    seen_pos[inst.gold_index]++;
    for (int p : inst.decoy_positions) {
      if (p < 0 || static_cast<std::size_t>(p) >= inst.options.size()) {
        fail("decoy position out of range");
      } else {
        seen_pos[p]++;
      }
    }
    if (std::any_of(seen_pos.begin(), seen_pos.end(), [](int c) { return c != 1; })) {
      fail("option positions are not a permutation");
    }
    if (!errs.empty()) {
      report.failures.insert(report.failures.end(), errs.begin(), errs.end());
      continue;
    }
    std::size_t target;
    try {
      target = ctx.doc_of(inst.id);
    } catch (const InvalidArgument&) {
      fail("instance id not found in corpus");
      report.failures.insert(report.failures.end(), errs.begin(), errs.end());
      continue;
    }
    const Document& doc = corpus.docs[target];
    const auto& gold = inst.options[inst.gold_index];
    if (gold.text != doc.title) fail("gold option text differs from corpus title");
    if (gold.tokens != tokenize(gold.text)) fail("gold tokens are stale");
    if (inst.article != doc.article) fail("article differs from corpus");
    for (std::size_t d = 0; d < inst.decoy_ids.size(); ++d) {
      std::size_t cand;
      try {
        cand = ctx.doc_of(inst.decoy_ids[d]);
      } catch (const InvalidArgument&) {
        fail("decoy id not in corpus: " + inst.decoy_ids[d]);
        continue;
      }
      const auto& opt = inst.options[inst.decoy_positions[d]];
      if (opt.text != corpus.docs[cand].title) fail("decoy text differs from its corpus title");
      if (cand == target || opt.tokens == gold.tokens) fail("decoy equals the gold title");
      const double bt = bleu(ctx.title_ids[cand], ctx.title_ids[target], cfg.bleu);
      if (bt >= cfg.surface_guard) fail("decoy violates the surface guard (BLEU " + std::to_string(bt) + ")");
    }
    if (inst.variant != Variant::kCombined) {
      for (std::size_t a = 0; a < inst.options.size(); ++a) {
        for (std::size_t b = a + 1; b < inst.options.size(); ++b) {
          if (inst.options[a].tokens == inst.options[b].tokens) fail("two options are identical");
        }
      }
    }
    if (inst.variant == Variant::kPv) {
      if (inst.decoy_scores.size() != cfg.nr_decoys) fail("expected one score per decoy");
      for (std::size_t d = 0; d < inst.decoy_scores.size() && d < inst.decoy_ids.size(); ++d) {
        const double s = inst.decoy_scores[d];
        if (!(s > 0.0)) fail("non-positive decoy score");
        if (d > 0 && s > inst.decoy_scores[d - 1]) fail("decoy scores not descending");
        std::size_t cand;
        try {
          cand = ctx.doc_of(inst.decoy_ids[d]);
        } catch (const InvalidArgument&) {
          continue;
        }
        const double again = ctx.score(cand, target, cfg);
        if (std::abs(again - s) > score_tolerance) {
          fail("decoy score " + std::to_string(s) + " does not recompute (" +
               std::to_string(again) + ")");
        }
      }
    }
    if (inst.variant != Variant::kCombined && !cfg.cross_split_filter &&
        inst.split != split_of_rank(rank[idx], ds.size(), cfg.split)) {
      fail("split label differs from the hash policy");
    }
    if (errs.empty()) {
      ++report.passed;
    } else {
      report.failures.insert(report.failures.end(), errs.begin(), errs.end());
    }
  }
  return report;
}

std::array<SplitStats, 3> dataset_stats(const McDataset& ds) {
  std::array<SplitStats, 3> stats{};
  std::array<double, 3> article_tokens{}, answer_tokens{}, answers{};
  for (const auto& inst : ds.instances) {
    const auto s = static_cast<std::size_t>(inst.split);
    stats[s].instances++;
    article_tokens[s] += static_cast<double>(inst.article_tokens.size());
    for (const auto& o : inst.options) {
      answer_tokens[s] += static_cast<double>(o.tokens.size());
      answers[s] += 1;
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (stats[s].instances) {
      stats[s].avg_article_tokens = article_tokens[s] / static_cast<double>(stats[s].instances);
      stats[s].avg_answer_tokens = answer_tokens[s] / answers[s];
    }
  }
  return stats;
}

std::string format_stats_table(const std::array<SplitStats, 3>& stats) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "Stats" << std::right << std::setw(12) << "Train"
     << std::setw(10) << "Dev" << std::setw(10) << "Test" << '\n';
  os << std::left << std::setw(22) << "#Instances" << std::right;
  for (std::size_t s = 0; s < 3; ++s) os << std::setw(s == 0 ? 12 : 10) << stats[s].instances;
  os << '\n' << std::left << std::setw(22) << "Avg. tokens/article" << std::right << std::fixed
     << std::setprecision(1);
  for (std::size_t s = 0; s < 3; ++s) os << std::setw(s == 0 ? 12 : 10) << stats[s].avg_article_tokens;
  os << '\n' << std::left << std::setw(22) << "Avg. tokens/answer" << std::right;
  for (std::size_t s = 0; s < 3; ++s) os << std::setw(s == 0 ? 12 : 10) << stats[s].avg_answer_tokens;
  os << '\n';
  return os.str();
}

void write_dataset(const McDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  for (const auto& inst : ds.instances) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["article"] = inst.article;
    std::vector<std::string> options;
    for (const auto& o : inst.options) options.push_back(o.text);
    j["options"] = options;
    j["label"] = inst.gold_index;
    j["decoy_scores"] = inst.decoy_scores;
    j["split"] = to_string(inst.split);
    j["variant"] = to_string(inst.variant);
    j["decoy_ids"] = inst.decoy_ids;
    j["decoy_positions"] = inst.decoy_positions;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
  std::ofstream prov(path.string() + ".provenance.json", std::ios::binary);
  prov << (ds.provenance.empty() ? "{}" : ds.provenance) << '\n';
}

McDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  McDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      McInstance inst;
      inst.id = j.at("id").get<std::string>();
      inst.article = j.at("article").get<std::string>();
      inst.article_tokens = tokenize(inst.article);
      for (const auto& o : j.at("options")) {
        const auto text = o.get<std::string>();
        inst.options.push_back(McOption{text, tokenize(text)});
      }
      inst.gold_index = j.at("label").get<int>();
      inst.decoy_scores = j.value("decoy_scores", std::vector<double>{});
      inst.split = parse_split(j.at("split").get<std::string>());
      inst.variant = parse_variant(j.at("variant").get<std::string>());
      inst.decoy_ids = j.value("decoy_ids", std::vector<std::string>{});
      inst.decoy_positions = j.value("decoy_positions", std::vector<int>{});
      if (inst.gold_index < 0 || static_cast<std::size_t>(inst.gold_index) >= inst.options.size()) {
        throw IoError("label out of range");
      }
      ds.instances.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::ifstream prov(path.string() + ".provenance.json");
  if (prov) {
    std::stringstream ss;
    ss << prov.rdbuf();
    ds.provenance = ss.str();
    while (!ds.provenance.empty() && ds.provenance.back() == '\n') ds.provenance.pop_back();
  }
  return ds;
}

}  // namespace mcforge
