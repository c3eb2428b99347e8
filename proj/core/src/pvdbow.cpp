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

#include "mcforge/pvdbow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mcforge/binio.hpp"
#include "mcforge/error.hpp"
#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

namespace {

constexpr std::string_view kPvMagic = "MCFPV001";

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log(sigmoid(x)) without overflow.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// Cumulative unigram^power distribution over non-sentinel vocabulary ids.
class NoiseSampler {
 public:
  NoiseSampler(const Vocabulary& vocab, double power) {
    double acc = 0.0;
    for (TokenId id = Vocabulary::kNumSentinels; id < vocab.size(); ++id) {
      acc += std::pow(static_cast<double>(vocab.count(id)), power);
      cumulative_.push_back(acc);
    }
  }

  TokenId sample(Rng& rng) const {
    const double u = uniform_unit(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
    return static_cast<TokenId>(idx + Vocabulary::kNumSentinels);
  }

 private:
  std::vector<double> cumulative_;
};

void init_vector(std::span<float> v, Rng& rng) {
  const double dim = static_cast<double>(v.size());
  for (float& x : v) x = static_cast<float>((uniform_unit(rng) - 0.5) / dim);
}

std::vector<TokenId> known_ids(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<TokenId> ids;
  for (const auto& t : tokens) {
    const TokenId id = vocab.id(t);
    if (id != Vocabulary::kUnk) ids.push_back(id);
  }
  return ids;
}

// Plain or relaxed-atomic access to the shared output table.
template <bool kShared>
struct TableAccess {
  static float load(float* p) {
    if constexpr (kShared) {
      return std::atomic_ref<float>(*p).load(std::memory_order_relaxed);
    } else {
      return *p;
    }
  }
  static void store(float* p, float v) {
    if constexpr (kShared) {
      std::atomic_ref<float>(*p).store(v, std::memory_order_relaxed);
    } else {
      *p = v;
    }
  }
};

// One SGD pass of a document vector over its tokens. Returns the summed loss.
// When `update_output` is false the output table is treated as frozen.
template <bool kShared>
double train_document(std::span<float> doc, std::span<const TokenId> ids, float* output,
                      std::size_t dim, const NoiseSampler& noise, int negatives, double lr,
                      bool update_output, Rng& rng, std::vector<float>& grad_acc) {
  using Access = TableAccess<kShared>;
  double loss = 0.0;
  for (TokenId target : ids) {
    std::fill(grad_acc.begin(), grad_acc.end(), 0.0f);
    for (int s = 0; s <= negatives; ++s) {
      TokenId word = target;
      double label = 1.0;
      if (s > 0) {
        word = noise.sample(rng);
        if (word == target) continue;
        label = 0.0;
      }
      float* out = output + static_cast<std::size_t>(word) * dim;
      double f = 0.0;
      for (std::size_t k = 0; k < dim; ++k) f += static_cast<double>(doc[k]) * Access::load(out + k);
      loss += label > 0.5 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
      const float g = static_cast<float>((label - sigmoid(f)) * lr);
      for (std::size_t k = 0; k < dim; ++k) grad_acc[k] += g * Access::load(out + k);
      if (update_output) {
        for (std::size_t k = 0; k < dim; ++k) Access::store(out + k, Access::load(out + k) + g * doc[k]);
      }
    }
    for (std::size_t k = 0; k < dim; ++k) doc[k] += grad_acc[k];
  }
  return loss;
}

RowMatrix normalized_rows(const PvModel& model) {
  const std::size_t n = model.num_docs();
  const std::size_t d = model.dim();
  RowMatrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto v = model.doc_vector(r);
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += static_cast<double>(v[k]) * v[k];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error("doc vector " + model.doc_ids[r] + " is zero");
    for (std::size_t k = 0; k < d; ++k) m(r, k) = v[k] / norm;
  }
  return m;
}

struct Candidate {
  double score;
  std::uint32_t row;
};

// Keeps the best `n` candidates; `better` orders by score desc, id asc.
template <typename Better>
std::vector<std::uint32_t> select_top(const double* scores, std::size_t rows, std::size_t skip,
                                      std::size_t n, Better better) {
  std::vector<Candidate> heap;
  heap.reserve(n + 1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (r == skip) continue;
    Candidate c{scores[r], static_cast<std::uint32_t>(r)};
    if (heap.size() < n) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), better);
    } else if (better(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), better);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), better);
    }
  }
  std::sort(heap.begin(), heap.end(), better);
  std::vector<std::uint32_t> out;
  out.reserve(heap.size());
  for (const auto& c : heap) out.push_back(c.row);
  return out;
}

auto make_better(const PvModel& model) {
  return [&model](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return model.doc_ids[a.row] < model.doc_ids[b.row];
  };
}

nlohmann::json config_json(const PvConfig& c) {
  return {{"dim", c.dim},
          {"epochs", c.epochs},
          {"min_count", c.min_count},
          {"max_types", c.max_types},
          {"negative_samples", c.negative_samples},
          {"initial_lr", c.initial_lr},
          {"final_lr", c.final_lr},
          {"noise_exponent", c.noise_exponent},
          {"seed", c.seed},
          {"window_is_whole_title", c.window_is_whole_title},
          {"workers", c.workers},
          {"infer_steps", c.infer_steps}};
}

PvConfig config_from_json(const nlohmann::json& j) {
  PvConfig c;
  c.dim = j.at("dim");
  c.epochs = j.at("epochs");
  c.min_count = j.at("min_count");
  c.max_types = j.at("max_types");
  c.negative_samples = j.at("negative_samples");
  c.initial_lr = j.at("initial_lr");
  c.final_lr = j.at("final_lr");
  c.noise_exponent = j.at("noise_exponent");
  c.seed = j.at("seed");
  c.window_is_whole_title = j.at("window_is_whole_title");
  c.workers = j.at("workers");
  c.infer_steps = j.at("infer_steps");
  return c;
}

}  // namespace

void PvConfig::validate() const {
  if (dim < 1) throw InvalidArgument("pv dim must be >= 1");
  if (epochs < 1) throw InvalidArgument("pv epochs must be >= 1");
  if (negative_samples < 1) throw InvalidArgument("pv negative_samples must be >= 1");
  if (min_count < 1) throw InvalidArgument("pv min_count must be >= 1");
  if (!(initial_lr > 0) || !(final_lr > 0)) throw InvalidArgument("pv learning rates must be > 0");
  if (workers < 1) throw InvalidArgument("pv workers must be >= 1");
  if (!window_is_whole_title) throw InvalidArgument("only whole-title windows are supported");
}

std::span<const float> PvModel::doc_vector(std::string_view id) const {
  return doc_vector(row_of(id));
}

std::size_t PvModel::row_of(std::string_view id) const {
  auto it = doc_index.find(std::string(id));
  if (it == doc_index.end()) throw InvalidArgument("unknown title id: " + std::string(id));
  return it->second;
}

std::uint64_t PvModel::fingerprint() const {
  std::uint64_t h = fnv1a64(config_json(config).dump());
  h = mix64(h ^ vocab.fingerprint());
  for (const auto& id : doc_ids) h = fnv1a64(id, h);
  auto bytes = [](const std::vector<float>& v) {
    return std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  };
  h = fnv1a64(bytes(doc_vectors), h);
  h = fnv1a64(bytes(word_output), h);
  return h;
}

PvModel train_pv(const Corpus& corpus, const PvConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw InvalidArgument("train_pv: corpus is empty");

  PvModel model;
  model.config = cfg;
  model.vocab = build_vocab(corpus, VocabFields::kTitle, cfg.min_count, cfg.max_types,
                            static_cast<std::size_t>(cfg.workers));
  if (model.vocab.size() <= Vocabulary::kNumSentinels) {
    throw InvalidArgument("train_pv: no title token reaches min_count");
  }
  const std::size_t n = corpus.size();
  const std::size_t dim = model.dim();
  std::vector<std::vector<TokenId>> docs(n);
  std::uint64_t words_per_epoch = 0;
  model.doc_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = corpus.docs[i];
    if (!model.doc_index.emplace(d.id, i).second) {
      throw InvalidArgument("train_pv: duplicate document id " + d.id);
    }
    model.doc_ids.push_back(d.id);
    docs[i] = known_ids(model.vocab, tokenize(d.title));
    words_per_epoch += docs[i].size();
  }

  model.doc_vectors.resize(n * dim);
  model.word_output.assign(model.vocab.size() * dim, 0.0f);
  {
    Rng init(derive_seed(cfg.seed, "pv-init"));
    init_vector(model.doc_vectors, init);
  }
  const NoiseSampler noise(model.vocab, cfg.noise_exponent);
  const double total_words = static_cast<double>(words_per_epoch) * cfg.epochs;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> worker_loss(workers, 0.0);
    std::vector<std::uint64_t> worker_samples(workers, 0);
    const std::uint64_t epoch_offset = words_per_epoch * static_cast<std::uint64_t>(epoch);
    auto run = [&]<bool kShared>(std::size_t w, std::size_t begin, std::size_t end) {
      Rng rng(derive_seed(cfg.seed, "pv-sample",
                          std::to_string(epoch) + "/" + std::to_string(w)));
      std::vector<float> grad_acc(dim);
      // Words processed before this chunk in a sequential pass; keeps the
      // learning-rate schedule identical for any worker count.
      std::uint64_t processed = epoch_offset;
      for (std::size_t i = 0; i < begin; ++i) processed += docs[i].size();
      for (std::size_t i = begin; i < end; ++i) {
        const double progress = static_cast<double>(processed) / total_words;
        const double lr = std::max(cfg.final_lr,
                                   cfg.initial_lr - (cfg.initial_lr - cfg.final_lr) * progress);
        std::span<float> doc(model.doc_vectors.data() + i * dim, dim);
        worker_loss[w] += train_document<kShared>(doc, docs[i], model.word_output.data(), dim,
                                                  noise, cfg.negative_samples, lr, true, rng,
                                                  grad_acc);
        worker_samples[w] += docs[i].size() * static_cast<std::uint64_t>(cfg.negative_samples + 1);
        processed += docs[i].size();
      }
    };
    if (workers <= 1) {
      run.operator()<false>(0, 0, n);
    } else {
      const std::size_t chunk = (n + workers - 1) / workers;
      parallel_chunks(workers, workers, [&](std::size_t wb, std::size_t we) {
        for (std::size_t w = wb; w < we; ++w) {
          run.operator()<true>(w, w * chunk, std::min(n, (w + 1) * chunk));
        }
      });
    }
    double loss = 0.0;
    std::uint64_t samples = 0;
    for (std::size_t w = 0; w < workers; ++w) {
      loss += worker_loss[w];
      samples += worker_samples[w];
    }
    model.epoch_loss.push_back(samples ? loss / static_cast<double>(samples) : 0.0);
  }
  for (float x : model.doc_vectors) {
    if (!std::isfinite(x)) throw Error("train_pv: non-finite document vector");
  }
  return model;
}

InferResult infer_vector(const PvModel& model, std::span<const std::string> tokens, int steps) {
  if (steps < 0) throw InvalidArgument("infer_vector: steps must be >= 0");
  const std::size_t dim = model.dim();
  InferResult result;
  result.vector.resize(dim);
  const std::string key = join_tokens(tokens);
  Rng rng(derive_seed(model.config.seed, "pv-infer", key));
  init_vector(result.vector, rng);
  const auto ids = known_ids(model.vocab, tokens);
  result.known_tokens = ids.size();
  result.all_unknown = ids.empty();
  if (ids.empty() || steps == 0) return result;

  const NoiseSampler noise(model.vocab, model.config.noise_exponent);
  std::vector<float> grad_acc(dim);
  // The output table is frozen; train_document never writes through it.
  auto* output = const_cast<float*>(model.word_output.data());
  const auto& c = model.config;
  for (int s = 0; s < steps; ++s) {
    const double progress = static_cast<double>(s) / steps;
    const double lr = c.initial_lr - (c.initial_lr - c.final_lr) * progress;
    train_document<false>(result.vector, ids, output, dim, noise, c.negative_samples, lr, false,
                          rng, grad_acc);
  }
  return result;
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw InvalidArgument("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += static_cast<double>(u[k]) * v[k];
    nu += static_cast<double>(u[k]) * u[k];
    nv += static_cast<double>(v[k]) * v[k];
  }
  if (nu == 0.0 || nv == 0.0) throw InvalidArgument("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

NeighborList neighbors(const PvModel& model, std::string_view query_id, std::size_t n) {
  if (n < 1) throw InvalidArgument("neighbors: N must be >= 1");
  const std::size_t q = model.row_of(query_id);
  const RowMatrix m = normalized_rows(model);
  const Eigen::VectorXd scores = m * m.row(static_cast<Eigen::Index>(q)).transpose();
  std::vector<double> clamped(scores.data(), scores.data() + scores.size());
  for (double& s : clamped) s = std::clamp(s, -1.0, 1.0);
  NeighborList out;
  out.query_id = std::string(query_id);
  for (std::uint32_t r : select_top(clamped.data(), clamped.size(), q, n, make_better(model))) {
    out.entries.push_back({model.doc_ids[r], clamped[r]});
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> all_neighbors(const PvModel& model, std::size_t n,
                                                      std::size_t workers) {
  if (n < 1) throw InvalidArgument("all_neighbors: N must be >= 1");
  const RowMatrix m = normalized_rows(model);
  const std::size_t rows = model.num_docs();
  std::vector<std::vector<std::uint32_t>> out(rows);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (rows + kBlock - 1) / kBlock;
  const auto better = make_better(model);
  parallel_chunks(blocks, workers, [&](std::size_t b0, std::size_t b1) {
    RowMatrix scores;
    std::vector<double> row_scores(rows);
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t begin = b * kBlock;
      const std::size_t len = std::min(kBlock, rows - begin);
      scores.noalias() = m.middleRows(static_cast<Eigen::Index>(begin),
                                      static_cast<Eigen::Index>(len)) * m.transpose();
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t r = 0; r < rows; ++r) {
          row_scores[r] = std::clamp(scores(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(r)), -1.0, 1.0);
        }
        out[begin + i] = select_top(row_scores.data(), rows, begin + i, n, better);
      }
    }
  });
  return out;
}

void save_pv(const PvModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PV model: " + path.string());
  nlohmann::ordered_json h;
  h["format"] = "mcforge-pv";
  h["version"] = 1;
  h["config"] = config_json(model.config);
  h["num_docs"] = model.num_docs();
  h["vocab_size"] = model.vocab.size();
  h["dim"] = model.dim();
  h["epoch_loss"] = model.epoch_loss;
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (TokenId i = 0; i < model.vocab.size(); ++i) {
    tokens.push_back(model.vocab.token(i));
    counts.push_back(model.vocab.count(i));
  }
  h["vocab_tokens"] = tokens;
  h["vocab_counts"] = counts;
  h["vocab_min_count"] = model.vocab.min_count();
  h["doc_ids"] = model.doc_ids;
  h["payloads"] = {"doc_vectors", "word_output"};
  binio::write_header(out, kPvMagic, h.dump());
  binio::write_f32<float>(out, model.doc_vectors);
  binio::write_f32<float>(out, model.word_output);
  if (!out) throw IoError("write failed: " + path.string());
}

PvModel load_pv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PV model: " + path.string());
  const auto h = nlohmann::json::parse(binio::read_header(in, kPvMagic));
  if (h.at("version") != 1) throw IoError("unsupported PV model version");
  PvModel model;
  model.config = config_from_json(h.at("config"));
  model.epoch_loss = h.at("epoch_loss").get<std::vector<double>>();
  const auto tokens = h.at("vocab_tokens").get<std::vector<std::string>>();
  const auto counts = h.at("vocab_counts").get<std::vector<std::uint64_t>>();
  std::unordered_map<std::string, std::uint64_t> count_map;
  for (std::size_t i = Vocabulary::kNumSentinels; i < tokens.size(); ++i) {
    count_map[tokens[i]] = counts[i];
  }
  model.vocab = Vocabulary::from_counts(count_map, h.at("vocab_min_count").get<std::uint64_t>(),
                                        model.config.max_types);
  if (model.vocab.size() != tokens.size()) throw IoError("PV vocabulary does not round-trip");
  for (TokenId i = 0; i < tokens.size(); ++i) {
    if (model.vocab.token(i) != tokens[i]) throw IoError("PV vocabulary order mismatch");
  }
  model.doc_ids = h.at("doc_ids").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < model.doc_ids.size(); ++i) model.doc_index[model.doc_ids[i]] = i;
  model.doc_vectors.resize(model.num_docs() * model.dim());
  model.word_output.resize(model.vocab.size() * model.dim());
  binio::read_f32<float>(in, model.doc_vectors);
  binio::read_f32<float>(in, model.word_output);
  return model;
}

}  // namespace mcforge
