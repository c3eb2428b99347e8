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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mcforge/corpus.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/textmetrics.hpp"

namespace mcforge {

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;

  void validate() const;
};

/// Parameters of the decoy-selection procedure. Score weights and the
/// surface-similarity guard follow the published setting
/// (lambda_e = 1, lambda_s = 0.5, L = 0.5, four decoys).
struct McCreateConfig {
  std::size_t neighborhood = 100;  // N
  std::size_t nr_decoys = 4;
  double lambda_e = 1.0;
  double lambda_s = 0.5;
  double surface_guard = 0.5;  // L
  std::uint64_t seed = 1;
  SplitRatios split;
  BleuConfig bleu;
  bool cross_split_filter = false;
  std::size_t workers = 1;

  void validate() const;
  std::string to_json() const;
};

enum class Split { kTrain, kDev, kTest };
enum class Variant { kPv, kRnd, kCombined };

std::string_view to_string(Split s);
std::string_view to_string(Variant v);
Split parse_split(std::string_view s);
Variant parse_variant(std::string_view s);

struct McOption {
  std::string text;
  std::vector<std::string> tokens;
};

/// One multiple-choice instance: an article, its options, and which option
/// is the true title. `decoy_ids[i]` is the corpus title behind option
/// `decoy_positions[i]`; for the pv variant `decoy_scores[i]` is its score,
/// in descending order.
struct McInstance {
  std::string id;
  std::string article;
  std::vector<std::string> article_tokens;
  std::vector<McOption> options;
  int gold_index = 0;
  std::vector<double> decoy_scores;
  std::vector<std::string> decoy_ids;
  std::vector<int> decoy_positions;
  Split split = Split::kTrain;
  Variant variant = Variant::kPv;
};

struct McDataset {
  std::vector<McInstance> instances;
  std::string provenance;  // JSON text

  std::size_t size() const { return instances.size(); }
  std::vector<const McInstance*> in_split(Split s) const;
};

/// The weighted combination with the non-negativity floor applied; the
/// surface guard is the caller's job (see `score`).
double combine_score(double pv_cosine, double bleu_title, double bleu_article,
                     const McCreateConfig& cfg);

/// Decoy score of `candidate`'s title for the pair (target title, article).
/// Returns 0 when the candidate is too surface-similar to the target title
/// (BLEU >= L) or when the weighted sum is not positive. Both titles must be
/// stored in `pv`.
double score(const Document& candidate, const Document& target, const PvModel& pv,
             const McCreateConfig& cfg);

/// Builds the pv-variant dataset: for every document, score its N nearest
/// titles, keep the positive ones, and emit an instance when at least
/// nr_decoys remain, using the top-scoring distinct titles as decoys.
/// Instances are sorted by id and assigned to splits.
McDataset build_dataset(const Corpus& corpus, const PvModel& pv, const McCreateConfig& cfg);

/// Replaces every instance's decoys with titles drawn uniformly from the
/// corpus (distinct, not the gold title, BLEU against gold < L).
McDataset build_rnd_dataset(const Corpus& corpus, const McDataset& base, std::uint64_t seed,
                            const McCreateConfig& cfg = {});

/// Merges pv and rnd variants into 9-option training instances.
McDataset combine(const McDataset& base, const McDataset& rnd, std::uint64_t seed = 0);

/// Assigns splits by ranking ids on a keyed hash: stable under reordering,
/// and split sizes equal round(ratio * n) (test takes the remainder).
void assign_splits(McDataset& ds, const SplitRatios& ratios, std::uint64_t seed);
Split split_for(std::string_view id, const std::vector<std::string>& all_ids,
                const SplitRatios& ratios, std::uint64_t seed);

enum class PairOrder { kGrouped, kShuffled };

struct PairExample {
  std::string instance_id;
  int option_index = 0;
  const McOption* title = nullptr;
  const McInstance* instance = nullptr;
  int label = 0;
};

/// Flattens instances into (title, article, label) pairs. Grouped keeps the
/// pairs of one instance contiguous; shuffled is a seeded global permutation.
std::vector<PairExample> export_pairs(const McDataset& ds, PairOrder order, std::uint64_t seed);

struct ValidationReport {
  std::size_t checked = 0;
  std::size_t passed = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

/// Re-checks every instance invariant against the corpus and PV model.
ValidationReport validate_dataset(const McDataset& ds, const Corpus& corpus, const PvModel& pv,
                                  const McCreateConfig& cfg, double score_tolerance = 1e-6);

struct SplitStats {
  std::size_t instances = 0;
  double avg_article_tokens = 0.0;
  double avg_answer_tokens = 0.0;
};

std::array<SplitStats, 3> dataset_stats(const McDataset& ds);
std::string format_stats_table(const std::array<SplitStats, 3>& stats);

void write_dataset(const McDataset& ds, const std::filesystem::path& path);
McDataset read_dataset(const std::filesystem::path& path);

}  // namespace mcforge
