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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "fixtures.hpp"
#include "mcforge/checkpoint.hpp"
#include "mcforge/evalharness.hpp"
#include "mcforge/error.hpp"
#include "mcforge/mccreate.hpp"
#include "mcforge/training.hpp"

using namespace mcforge;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = 600;
  c.embed_dim = 16;
  c.gru_hidden = 16;
  c.gru_layers = 1;
  c.ffnn_hidden = {32, 16};
  c.head_hidden = {16, 8};
  c.max_article_len = 40;
  c.max_title_len = 12;
  return c;
}

struct Encoded {
  Vocabulary vocab;
  std::vector<EncodedInstance> train;
};

Encoded encode_train(const ModelConfig& cfg, std::size_t n) {
  const McDataset& ds = fixtures::small_dataset();
  Encoded e{build_model_vocab(ds, cfg.vocab_size), {}};
  auto refs = ds.in_split(Split::kTrain);
  refs.resize(std::min(n, refs.size()));
  e.train = encode_instances(refs, e.vocab, cfg);
  return e;
}

TrainConfig quick(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 10;
  t.learning_rate = 0.05;
  t.eval_every = 50;
  return t;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("mcforge_test_training_" + name);
}

}  // namespace

TEST_CASE("FFNN memorises a small training set") {
  const ModelConfig cfg = small_model(ModelKind::kFfnn);
  const Encoded e = encode_train(cfg, 40);
  TrainConfig t = quick(400);
  t.stop_at_dev_acc = 1.0;
  const TrainResult r = train_model(cfg, e.train, e.train, t);
  CHECK(r.best_dev_acc == 1.0);
  CHECK(model_accuracy(r.best, cfg, e.train) == 1.0);
  CHECK(r.log.back().step < 400);  // stopped early
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
}

TEST_CASE("FFNN5 loss goes down") {
  const ModelConfig cfg = small_model(ModelKind::kFfnn5);
  const Encoded e = encode_train(cfg, 40);
  const TrainResult r = train_model(cfg, e.train, {}, quick(100));
  CHECK(std::isnan(r.best_dev_acc));
  CHECK(r.log.back().train_loss < 0.8 * r.log.front().train_loss);
}

TEST_CASE("results do not depend on the worker count") {
  const ModelConfig cfg = small_model(ModelKind::kHybrid);
  const Encoded e = encode_train(cfg, 20);
  TrainConfig t = quick(6);
  t.eval_every = 3;
  const TrainResult a = train_model(cfg, e.train, e.train, t);
  t.workers = 3;
  const TrainResult b = train_model(cfg, e.train, e.train, t);
  REQUIRE(a.last.size() == b.last.size());
  for (std::size_t i = 0; i < a.last.size(); ++i) CHECK(a.last.at(i).value == b.last.at(i).value);
  CHECK(a.log.size() == b.log.size());
  CHECK(a.log.back().train_loss == b.log.back().train_loss);
}

TEST_CASE("non-finite parameters raise TrainingDiverged") {
  const ModelConfig cfg = small_model(ModelKind::kFfnn);
  const Encoded e = encode_train(cfg, 10);
  ad::ParamStore<float> init;
  init_params(init, cfg, 1);
  for (float& v : init.at(0).value) v = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(train_model(cfg, std::move(init), e.train, {}, quick(5)), TrainingDiverged);
}

TEST_CASE("pair-level training runs in both orders") {
  const ModelConfig cfg = small_model(ModelKind::kFfnn);
  const McDataset& ds = fixtures::small_dataset();
  McDataset sub;
  for (const McInstance* inst : ds.in_split(Split::kTrain)) {
    if (sub.instances.size() == 30) break;
    sub.instances.push_back(*inst);
  }
  const Vocabulary vocab = build_model_vocab(ds, cfg.vocab_size);
  const auto dev = encode_instances(all_instances(sub), vocab, cfg);
  for (PairOrder order : {PairOrder::kGrouped, PairOrder::kShuffled}) {
    const auto pairs = export_pairs(sub, order, 3);
    const auto train = encode_pairs(pairs, vocab, cfg);
    REQUIRE(train.size() == 150);
    std::size_t positives = 0;
    for (const auto& p : train) positives += p.gold == 0;
    CHECK(positives == 30);
    TrainConfig t = quick(150);
    t.shuffle = false;
    const TrainResult r = train_model(cfg, train, dev, t);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);
  }
}

TEST_CASE("best_row picks the earliest maximum") {
  const double nan = std::nan("");
  const std::vector<MetricsRow> log{
      {10, 1.0, 0.4, nan}, {20, 0.9, nan, nan}, {30, 0.8, 0.6, nan}, {40, 0.7, 0.6, nan}};
  CHECK(best_row(log).step == 30);
  const std::vector<MetricsRow> none{{10, 1.0, nan, nan}};
  CHECK_THROWS(best_row(none));
}

TEST_CASE("metrics CSV") {
  const double nan = std::nan("");
  const std::vector<MetricsRow> log{{1, 1.5, nan, nan}, {2, 1.25, 0.5, 0.125}};
  const fs::path p = temp_path("metrics.csv");
  write_metrics_csv(p, log);
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "step,train_loss,dev_acc,rouge_l");
  CHECK(lines[1] == "1,1.500000,,");
  CHECK(lines[2] == "2,1.250000,0.500000,0.125000");
  fs::remove(p);
}

TEST_CASE("TrainConfig JSON and validation") {
  TrainConfig t = quick(77);
  t.shuffle = false;
  t.stop_at_dev_acc = 0.9;
  const TrainConfig back = TrainConfig::from_json(t.to_json());
  CHECK(back.steps == 77);
  CHECK(back.shuffle == false);
  CHECK(back.stop_at_dev_acc == 0.9);
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
  const ModelConfig cfg = small_model(ModelKind::kHybrid);
  const Encoded e = encode_train(cfg, 5);
  ad::ParamStore<float> params;
  init_params(params, cfg, 11);
  const fs::path p = temp_path("model.ckpt");
  save_checkpoint(p, cfg, e.vocab, params, 123, 0.625);
  const Checkpoint ck = load_checkpoint(p);
  CHECK(ck.config == cfg);
  CHECK(ck.step == 123);
  CHECK(ck.dev_accuracy == 0.625);
  REQUIRE(ck.vocab.size() == e.vocab.size());
  for (TokenId i = 0; i < e.vocab.size(); ++i) CHECK(ck.vocab.token(i) == e.vocab.token(i));
  REQUIRE(ck.params.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(ck.params.at(i).name == params.at(i).name);
    CHECK(ck.params.at(i).value == params.at(i).value);
  }
  CHECK(model_accuracy(ck.params, ck.config, e.train) == model_accuracy(params, cfg, e.train));

  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  CHECK_THROWS(load_checkpoint(p));
  fs::remove(p);
}
