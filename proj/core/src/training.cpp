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


#include "mcforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"
#include "mcforge/textmetrics.hpp"

namespace mcforge {

void TrainConfig::validate() const {
  if (steps == 0) throw InvalidArgument("steps must be > 0");
  if (batch_size == 0) throw InvalidArgument("batch_size must be > 0");
  if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(clip_norm > 0)) throw InvalidArgument("clip_norm must be > 0");
  if (eval_every == 0) throw InvalidArgument("eval_every must be > 0");
  if (shard_size == 0) throw InvalidArgument("shard_size must be > 0");
  if (workers == 0) throw InvalidArgument("workers must be > 0");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j = {{"steps", steps},         {"batch_size", batch_size},
                      {"learning_rate", learning_rate}, {"clip_norm", clip_norm},
                      {"eval_every", eval_every}, {"dev_limit", dev_limit},
                      {"rouge_limit", rouge_limit}, {"shard_size", shard_size},
                      {"seed", seed}, {"shuffle", shuffle}, {"stop_at_dev_acc", stop_at_dev_acc}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.dev_limit = j.value("dev_limit", c.dev_limit);
  c.rouge_limit = j.value("rouge_limit", c.rouge_limit);
  c.shard_size = j.value("shard_size", c.shard_size);
  c.seed = j.value("seed", c.seed);
  c.shuffle = j.value("shuffle", c.shuffle);
  c.stop_at_dev_acc = j.value("stop_at_dev_acc", c.stop_at_dev_acc);
  c.validate();
  return c;
}

double model_accuracy(const ad::ParamStore<float>& params, const ModelConfig& cfg,
                      std::span<const EncodedInstance> instances, std::size_t workers) {
  if (instances.empty()) return std::nan("");
  const auto scores = score_instances<float>(params, cfg, instances, 16, workers);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (static_cast<std::size_t>(predict_instance(scores[i])) == instances[i].gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(instances.size());
}

double generation_rouge(const ad::ParamStore<float>& params, const ModelConfig& cfg,
                        std::span<const EncodedInstance> instances, std::size_t max_len,
                        std::size_t workers) {
  if (instances.empty()) return std::nan("");
  std::vector<double> r(instances.size());
  parallel_chunks(instances.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto gen = generate_answer<float>(params, cfg, instances[i].article, max_len);
      r[i] = rouge_l(std::span<const TokenId>(gen), instances[i].options[instances[i].gold]);
    }
  });
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

const MetricsRow& best_row(std::span<const MetricsRow> log) {
  const MetricsRow* best = nullptr;
  for (const MetricsRow& row : log) {
    if (std::isnan(row.dev_acc)) continue;
    if (best == nullptr || row.dev_acc > best->dev_acc) best = &row;
  }
  if (best == nullptr) throw InvalidArgument("best_row: no dev measurement in the log");
  return *best;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics: " + path.string());
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  out << "step,train_loss,dev_acc,rouge_l\n";
  for (const MetricsRow& r : log) {
    out << r.step << ',' << cell(r.train_loss) << ',' << cell(r.dev_acc) << ',' << cell(r.rouge_l) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TrainResult train_model(const ModelConfig& cfg, std::span<const EncodedInstance> train,
                        std::span<const EncodedInstance> dev, const TrainConfig& tcfg,
                        const ProgressFn& progress) {
  ad::ParamStore<float> params;
  init_params(params, cfg, tcfg.seed);
  return train_model(cfg, std::move(params), train, dev, tcfg, progress);
}

TrainResult train_model(const ModelConfig& cfg, ad::ParamStore<float> params,
                        std::span<const EncodedInstance> train,
                        std::span<const EncodedInstance> dev, const TrainConfig& tcfg,
                        const ProgressFn& progress) {
  cfg.validate();
  tcfg.validate();
  if (train.empty()) throw InvalidArgument("train_model: no training instances");

  const std::span<const EncodedInstance> dev_eval =
      tcfg.dev_limit > 0 && tcfg.dev_limit < dev.size() ? dev.first(tcfg.dev_limit) : dev;
  const std::span<const EncodedInstance> dev_rouge =
      dev.first(std::min(dev.size(), tcfg.rouge_limit));

  ad::AdagradState<float> opt;
  opt.learning_rate = tcfg.learning_rate;

  TrainResult result;
  result.best_dev_acc = std::nan("");
  bool have_best = false;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = train.size();
  std::uint64_t epoch = 0;

  for (std::size_t step = 1; step <= tcfg.steps; ++step) {
    std::vector<const EncodedInstance*> batch;
    while (batch.size() < std::min(tcfg.batch_size, train.size())) {
      if (cursor == train.size()) {
        std::iota(order.begin(), order.end(), 0);
        if (tcfg.shuffle) {
          Rng rng(derive_seed(tcfg.seed, "sample", std::to_string(epoch)));
          shuffle_range(order.begin(), order.end(), rng);
        }
        ++epoch;
        cursor = 0;
      }
      batch.push_back(&train[order[cursor++]]);
    }

    const double normalizer = static_cast<double>(loss_units(cfg, batch));
    const std::size_t shards = (batch.size() + tcfg.shard_size - 1) / tcfg.shard_size;
    std::vector<ad::Gradients<float>> shard_grads(shards);
    std::vector<double> shard_loss(shards);
    parallel_chunks(shards, tcfg.workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t s = b; s < e; ++s) {
        const std::size_t lo = s * tcfg.shard_size;
        const std::size_t hi = std::min(batch.size(), lo + tcfg.shard_size);
        ad::Tape<float> tape(&params);
        ForwardOptions fo;
        fo.normalizer = normalizer;
        const auto out = forward_batch<float>(
            tape, cfg, std::span<const EncodedInstance* const>(batch).subspan(lo, hi - lo), fo);
        shard_loss[s] = out.loss.item();
        shard_grads[s] = tape.backward(out.loss);
      }
    });
    double loss = 0.0;
    ad::Gradients<float> grads = std::move(shard_grads[0]);
    loss += shard_loss[0];
    for (std::size_t s = 1; s < shards; ++s) {
      ad::accumulate(grads, shard_grads[s]);
      loss += shard_loss[s];
    }
    const double norm = ad::clip_global_norm(grads, tcfg.clip_norm);
    if (!std::isfinite(loss) || !std::isfinite(norm)) {
      char msg[256];
      std::snprintf(msg, sizeof msg,
                    "training diverged at step %zu: loss=%g grad_norm=%g (lr=%g, batch=%zu)", step,
                    loss, norm, tcfg.learning_rate, batch.size());
      throw TrainingDiverged(msg);
    }
    ad::adagrad_step(params, grads, opt);

    MetricsRow row{step, loss, std::nan(""), std::nan("")};
    const bool eval = step % tcfg.eval_every == 0 || step == tcfg.steps;
    if (eval && !dev_eval.empty()) {
      row.dev_acc = model_accuracy(params, cfg, dev_eval, tcfg.workers);
      if (cfg.kind == ModelKind::kHybrid && !dev_rouge.empty()) {
        row.rouge_l = generation_rouge(params, cfg, dev_rouge, cfg.max_title_len, tcfg.workers);
      }
      if (!have_best || row.dev_acc > result.best_dev_acc) {
        have_best = true;
        result.best_dev_acc = row.dev_acc;
        result.best_step = step;
        result.best = params.clone();
      }
    }
    result.log.push_back(row);
    if (progress) progress(row);
    if (!std::isnan(row.dev_acc) && row.dev_acc >= tcfg.stop_at_dev_acc) break;
  }
  if (!have_best) {
    result.best_step = result.log.back().step;
    result.best = params.clone();
  }
  result.last = std::move(params);
  return result;
}

}  // namespace mcforge
