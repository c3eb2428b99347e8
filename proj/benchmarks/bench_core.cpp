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

#include <map>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mcforge/autodiff.hpp"
#include "mcforge/mcmodels.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/synth.hpp"
#include "mcforge/textmetrics.hpp"

using namespace mcforge;

namespace {

const Corpus& corpus(std::size_t docs) {
  static std::map<std::size_t, Corpus> cache;
  auto it = cache.find(docs);
  if (it == cache.end()) {
    SynthConfig s;
    s.docs = docs;
    it = cache.emplace(docs, synth_corpus(s)).first;
  }
  return it->second;
}

const PvModel& pv_model(std::size_t docs) {
  static std::map<std::size_t, PvModel> cache;
  auto it = cache.find(docs);
  if (it == cache.end()) {
    PvConfig c;
    c.dim = 64;
    c.epochs = 1;
    it = cache.emplace(docs, train_pv(corpus(docs), c)).first;
  }
  return it->second;
}

void BM_KnnScan(benchmark::State& state) {
  const auto docs = static_cast<std::size_t>(state.range(0));
  const PvModel& m = pv_model(docs);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(neighbors(m, m.doc_ids[q % docs], 100));
    ++q;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * docs));
}
BENCHMARK(BM_KnnScan)->Arg(5000)->Arg(25000)->Unit(benchmark::kMicrosecond);

void BM_BleuIndexed(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<TokenId> tok(4, 400);
  std::vector<TokenId> article(static_cast<std::size_t>(state.range(0))), title(10);
  for (auto& t : article) t = tok(gen);
  for (auto& t : title) t = tok(gen);
  const IndexedReference ref(article);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(title, ref));
}
BENCHMARK(BM_BleuIndexed)->Arg(50)->Arg(400);

void BM_BleuPlain(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<TokenId> tok(4, 400);
  std::vector<TokenId> article(static_cast<std::size_t>(state.range(0))), title(10);
  for (auto& t : article) t = tok(gen);
  for (auto& t : title) t = tok(gen);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bleu(std::span<const TokenId>(title), std::span<const TokenId>(article)));
  }
}
BENCHMARK(BM_BleuPlain)->Arg(50)->Arg(400);

void BM_PvEpoch(benchmark::State& state) {
  const Corpus& c = corpus(static_cast<std::size_t>(state.range(0)));
  PvConfig cfg;
  cfg.dim = 64;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_pv(c, cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * c.size()));
}
BENCHMARK(BM_PvEpoch)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_GruStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const std::size_t in = h, batch = 16;
  ad::ParamStore<float> store;
  store.add("w_zr", {in + h, 2 * h});
  store.add("b_zr", {1, 2 * h});
  store.add("w_h", {in + h, h});
  store.add("b_h", {1, h});
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<float> u(-0.1f, 0.1f);
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (float& v : store.at(i).value) v = u(gen);
  }
  std::vector<float> x(batch * in), h0(batch * h);
  for (float& v : x) v = u(gen);
  for (float& v : h0) v = u(gen);
  for (auto _ : state) {
    ad::Tape<float> tape(&store);
    const GruWeights<float> w{tape.param("w_zr"), tape.param("b_zr"), tape.param("w_h"), tape.param("b_h")};
    auto out = gru_cell(tape.constant({batch, in}, x), tape.constant({batch, h}, h0), w);
    benchmark::DoNotOptimize(tape.backward(ad::sum(out)));
  }
}
BENCHMARK(BM_GruStep)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
