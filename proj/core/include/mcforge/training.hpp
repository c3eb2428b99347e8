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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mcforge/autodiff.hpp"
#include "mcforge/error.hpp"
#include "mcforge/mcmodels.hpp"

namespace mcforge {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  double clip_norm = 4.0;
  std::size_t eval_every = 200;
  /// Dev instances scored at each evaluation; 0 = all.
  std::size_t dev_limit = 0;
  /// Dev instances decoded for ROUGE-L at each evaluation (hybrid only).
  std::size_t rouge_limit = 200;
  /// Instances per gradient shard. Shards are fixed by the batch, not by the
  /// worker count, and are reduced in shard order.
  std::size_t shard_size = 4;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  /// Reshuffle the training units every epoch; false keeps the given order.
  bool shuffle = true;
  /// Stop after the first evaluation whose dev accuracy reaches this value.
  /// Values above 1 never trigger.
  double stop_at_dev_acc = 2.0;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct MetricsRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  double dev_acc = 0.0;  // NaN when not evaluated
  double rouge_l = 0.0;  // NaN when not evaluated
};

struct TrainResult {
  ad::ParamStore<float> best;
  std::size_t best_step = 0;
  double best_dev_acc = 0.0;  // NaN without a dev set
  std::vector<MetricsRow> log;
  ad::ParamStore<float> last;
};

/// Raised when the loss or gradient norm stops being finite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

using ProgressFn = std::function<void(const MetricsRow&)>;

/// Mini-batch training: forward, backward, global-norm clipping, ADAGRAD.
/// Dev accuracy is measured every `eval_every` steps and after the last step;
/// the parameters of the evaluation with the highest dev accuracy (earliest
/// on ties) are returned in `best`.
TrainResult train_model(const ModelConfig& cfg, std::span<const EncodedInstance> train,
                        std::span<const EncodedInstance> dev, const TrainConfig& tcfg,
                        const ProgressFn& progress = {});

/// Continue from existing parameters instead of a fresh init.
TrainResult train_model(const ModelConfig& cfg, ad::ParamStore<float> init,
                        std::span<const EncodedInstance> train,
                        std::span<const EncodedInstance> dev, const TrainConfig& tcfg,
                        const ProgressFn& progress = {});

/// Fraction of instances whose highest-scored option is gold.
double model_accuracy(const ad::ParamStore<float>& params, const ModelConfig& cfg,
                      std::span<const EncodedInstance> instances, std::size_t workers = 1);

/// Mean ROUGE-L of greedy generations against gold titles.
double generation_rouge(const ad::ParamStore<float>& params, const ModelConfig& cfg,
                        std::span<const EncodedInstance> instances, std::size_t max_len,
                        std::size_t workers = 1);

/// Row with the highest dev accuracy; earliest step on ties. Rows without a
/// dev measurement are skipped; throws if there is none.
const MetricsRow& best_row(std::span<const MetricsRow> log);

/// CSV with header step,train_loss,dev_acc,rouge_l; unmeasured cells empty.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> log);

}  // namespace mcforge
