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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcforge/mccreate.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/textmetrics.hpp"

namespace mcforge {

/// Index of the largest score; ties go to the lowest index. Every chooser in
/// the project goes through this helper.
int argmax_lowest(std::span<const double> scores);

struct Prediction {
  std::string instance_id;
  int chosen_index = 0;
  std::vector<double> option_scores;
};

using InstanceRefs = std::vector<const McInstance*>;

InstanceRefs all_instances(const McDataset& ds);

std::vector<Prediction> baseline_random(const InstanceRefs& instances, std::uint64_t seed);
std::vector<Prediction> baseline_bleu(const InstanceRefs& instances, const BleuConfig& cfg = {});
std::vector<Prediction> baseline_pv(const InstanceRefs& instances, const PvModel& pv,
                                    int infer_steps, std::size_t workers = 1);

enum class Difficulty { kEasy, kMedium, kHard };
std::string_view to_string(Difficulty d);
std::optional<Difficulty> parse_difficulty(std::string_view s);

struct DifficultyCell {
  std::size_t n = 0;
  double share = 0.0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::string method_tag;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double errorbar = 0.0;  // posterior std of balanced accuracy
  std::string prior = "beta(1,1)";
  std::map<std::string, DifficultyCell> per_difficulty;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  bool operator==(const EvalReport&) const = default;
};

bool operator==(const DifficultyCell& a, const DifficultyCell& b);

struct AccuracyOptions {
  std::size_t errorbar_samples = 20000;
  std::uint64_t errorbar_seed = 17;
  // Optional per-instance difficulty labels (instance id -> label).
  const std::unordered_map<std::string, Difficulty>* difficulties = nullptr;
};

/// Fraction of predictions whose choice equals the gold index, with a
/// balanced-accuracy error bar whose classes are the gold positions. Throws
/// when an instance has no prediction.
EvalReport accuracy(const std::vector<Prediction>& preds, const InstanceRefs& golds,
                    std::string method_tag, const AccuracyOptions& opts = {});

/// Standard deviation of the posterior of the balanced accuracy: each class
/// k gets Beta(1 + correct_k, 1 + wrong_k) and the mean over classes is
/// sampled `samples` times. Requires samples >= 1000 and totals > 0.
double balanced_acc_errorbar(std::span<const std::size_t> per_class_correct,
                             std::span<const std::size_t> per_class_total, std::size_t samples,
                             std::uint64_t seed);

/// "Method | Dev | Test" table; a missing cell prints as "-".
struct BaselineRow {
  std::string method;
  std::optional<EvalReport> dev;
  std::optional<EvalReport> test;
};
std::string format_results_table(const std::vector<BaselineRow>& rows);

/// Per-difficulty table: share of instances and accuracy per label, plus
/// overall accuracy, one row per report.
std::string format_difficulty_table(const std::vector<EvalReport>& reports);

}  // namespace mcforge
