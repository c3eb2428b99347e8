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


#include "mcforge/mcmodels.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "mcforge/error.hpp"
#include "mcforge/evalharness.hpp"
#include "mcforge/parallel.hpp"
#include "mcforge/rng.hpp"

namespace mcforge {

using ad::Shape;
using ad::Var;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kFfnn: return "ffnn";
    case ModelKind::kFfnn5: return "ffnn5";
    case ModelKind::kHybrid: return "hybrid";
  }
  return "?";
}

std::string to_string(AttentionKind k) { return k == AttentionKind::kTanh ? "tanh" : "bilinear"; }
std::string to_string(Pooling p) { return p == Pooling::kMean ? "mean" : "final"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "ffnn") return ModelKind::kFfnn;
  if (s == "ffnn5") return ModelKind::kFfnn5;
  if (s == "hybrid") return ModelKind::kHybrid;
  throw InvalidArgument("unknown model kind '" + std::string(s) + "' (ffnn|ffnn5|hybrid)");
}

AttentionKind parse_attention(std::string_view s) {
  if (s == "tanh") return AttentionKind::kTanh;
  if (s == "bilinear") return AttentionKind::kBilinear;
  throw InvalidArgument("unknown attention '" + std::string(s) + "' (tanh|bilinear)");
}

Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::kMean;
  if (s == "final") return Pooling::kFinal;
  throw InvalidArgument("unknown pooling '" + std::string(s) + "' (mean|final)");
}

void ModelConfig::validate() const {
  if (vocab_size <= Vocabulary::kNumSentinels) throw InvalidArgument("vocab_size must exceed 4");
  if (embed_dim == 0 || gru_hidden == 0 || gru_layers == 0) {
    throw InvalidArgument("embed_dim, gru_hidden and gru_layers must be positive");
  }
  for (std::size_t h : ffnn_hidden) {
    if (h == 0) throw InvalidArgument("ffnn_hidden sizes must be positive");
  }
  for (std::size_t h : head_hidden) {
    if (h == 0) throw InvalidArgument("head_hidden sizes must be positive");
  }
  if (!(lambda_gen >= 0) || !std::isfinite(lambda_gen)) throw InvalidArgument("lambda_gen must be >= 0");
  if (max_article_len == 0 || max_title_len == 0) throw InvalidArgument("max lengths must be positive");
  if (!(embed_init > 0)) throw InvalidArgument("embed_init must be > 0");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind)},
                      {"vocab_size", vocab_size},
                      {"embed_dim", embed_dim},
                      {"ffnn_hidden", ffnn_hidden},
                      {"head_hidden", head_hidden},
                      {"gru_layers", gru_layers},
                      {"gru_hidden", gru_hidden},
                      {"attention", to_string(attention)},
                      {"tied_embeddings", tied_embeddings},
                      {"pooling", to_string(pooling)},
                      {"lambda_gen", lambda_gen},
                      {"max_article_len", max_article_len},
                      {"max_title_len", max_title_len},
                      {"embed_init", embed_init}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.ffnn_hidden = j.value("ffnn_hidden", c.ffnn_hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.gru_layers = j.value("gru_layers", c.gru_layers);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  if (j.contains("attention")) c.attention = parse_attention(j.at("attention").get<std::string>());
  c.tied_embeddings = j.value("tied_embeddings", c.tied_embeddings);
  if (j.contains("pooling")) c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  c.lambda_gen = j.value("lambda_gen", c.lambda_gen);
  c.max_article_len = j.value("max_article_len", c.max_article_len);
  c.max_title_len = j.value("max_title_len", c.max_title_len);
  c.embed_init = j.value("embed_init", c.embed_init);
  c.validate();
  return c;
}

ModelConfig desk_model_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = 10000;
  c.embed_dim = 64;
  c.gru_hidden = 64;
  c.ffnn_hidden = {256, 64};
  c.max_article_len = 120;
  c.max_title_len = 16;
  return c;
}

// ---- parameters ----

namespace {

void add_gru_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                    std::size_t in, std::size_t h) {
  out.push_back({prefix + ".w_zr", {in + h, 2 * h}});
  out.push_back({prefix + ".b_zr", {1, 2 * h}});
  out.push_back({prefix + ".w_h", {in + h, h}});
  out.push_back({prefix + ".b_h", {1, h}});
}

void add_mlp_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                    std::size_t in, const std::vector<std::size_t>& hidden, std::size_t classes) {
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    out.push_back({prefix + ".l" + std::to_string(i) + ".W", {prev, hidden[i]}});
    out.push_back({prefix + ".l" + std::to_string(i) + ".b", {1, hidden[i]}});
    prev = hidden[i];
  }
  out.push_back({prefix + ".out.W", {prev, classes}});
  out.push_back({prefix + ".out.b", {1, classes}});
}

bool is_embedding(const std::string& name) { return name.rfind("embed", 0) == 0; }
bool is_bias(const std::string& name) {
  const std::size_t dot = name.rfind('.');
  return dot != std::string::npos && dot + 1 < name.size() && name[dot + 1] == 'b';
}

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t V = cfg.vocab_size, E = cfg.embed_dim, H = cfg.gru_hidden;
  switch (cfg.kind) {
    case ModelKind::kFfnn:
      out.push_back({"embed", {V, E}});
      add_mlp_layout(out, "ffnn", 2 * E, cfg.ffnn_hidden, 2);
      break;
    case ModelKind::kFfnn5:
      out.push_back({"embed", {V, E}});
      add_mlp_layout(out, "ffnn", 6 * E, cfg.ffnn_hidden, 5);
      break;
    case ModelKind::kHybrid:
      if (cfg.tied_embeddings) {
        out.push_back({"embed", {V, E}});
      } else {
        out.push_back({"embed.src", {V, E}});
        out.push_back({"embed.tgt", {V, E}});
      }
      for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
        add_gru_layout(out, "enc.l" + std::to_string(l), l == 0 ? E : H, H);
      }
      for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
        add_gru_layout(out, "dec.l" + std::to_string(l), l == 0 ? E : H, H);
      }
      if (cfg.attention == AttentionKind::kBilinear) {
        out.push_back({"att.W", {H, H}});
      } else {
        out.push_back({"att.W1", {H, H}});
        out.push_back({"att.W2", {H, H}});
        out.push_back({"att.v", {H, 1}});
      }
      out.push_back({"out.Wc", {2 * H, H}});
      out.push_back({"out.bc", {1, H}});
      out.push_back({"out.W", {H, E}});
      out.push_back({"out.b", {1, V}});
      add_mlp_layout(out, "head", 2 * H, cfg.head_hidden, 2);
      break;
  }
  return out;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_layout(cfg)) n += shape.size();
  return n;
}

template <typename T>
void init_params(ad::ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed) {
  for (const auto& [name, shape] : parameter_layout(cfg)) {
    const std::size_t idx = store.add(name, shape);
    auto& v = store.at(idx).value;
    if (is_bias(name)) continue;
    Rng rng(derive_seed(seed, "init", name));
    const double a = is_embedding(name)
                         ? cfg.embed_init
                         : std::sqrt(6.0 / static_cast<double>(shape.rows + shape.cols));
    for (T& x : v) x = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * a);
  }
}

Vocabulary build_model_vocab(const McDataset& dataset, std::size_t vocab_size) {
  if (vocab_size <= Vocabulary::kNumSentinels) throw InvalidArgument("vocab_size must exceed 4");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::size_t used = 0;
  for (const McInstance& inst : dataset.instances) {
    if (inst.split != Split::kTrain) continue;
    ++used;
    for (const auto& t : inst.article_tokens) ++counts[t];
    for (const auto& o : inst.options) {
      for (const auto& t : o.tokens) ++counts[t];
    }
  }
  if (used == 0) throw InvalidArgument("build_model_vocab: dataset has no train instances");
  return Vocabulary::from_counts(counts, 1, vocab_size - Vocabulary::kNumSentinels);
}

std::size_t effective_length(std::span<const TokenId> ids) {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == Vocabulary::kPad) --n;
  return n;
}

namespace {

std::vector<TokenId> encode_seq(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                std::size_t max_len, bool& truncated) {
  std::vector<TokenId> ids = vocab.encode(tokens);
  if (ids.size() > max_len) {
    ids.resize(max_len);
    truncated = true;
  }
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  return ids;
}

}  // namespace

EncodedInstance encode_instance(const McInstance& inst, const Vocabulary& vocab,
                                const ModelConfig& cfg) {
  EncodedInstance e;
  e.id = inst.id;
  e.gold = static_cast<std::size_t>(inst.gold_index);
  e.article = encode_seq(inst.article_tokens, vocab, cfg.max_article_len, e.truncated);
  for (const auto& o : inst.options) {
    e.options.push_back(encode_seq(o.tokens, vocab, cfg.max_title_len, e.truncated));
  }
  return e;
}

std::vector<EncodedInstance> encode_instances(std::span<const McInstance* const> instances,
                                              const Vocabulary& vocab, const ModelConfig& cfg) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const McInstance* inst : instances) out.push_back(encode_instance(*inst, vocab, cfg));
  return out;
}

std::vector<EncodedInstance> encode_pairs(std::span<const PairExample> pairs,
                                          const Vocabulary& vocab, const ModelConfig& cfg) {
  std::vector<EncodedInstance> out;
  out.reserve(pairs.size());
  for (const PairExample& p : pairs) {
    EncodedInstance e;
    e.id = p.instance_id + "#" + std::to_string(p.option_index);
    e.gold = p.label == 1 ? 0 : kNoGold;
    e.article = encode_seq(p.instance->article_tokens, vocab, cfg.max_article_len, e.truncated);
    e.options.push_back(encode_seq(p.title->tokens, vocab, cfg.max_title_len, e.truncated));
    out.push_back(std::move(e));
  }
  return out;
}

// ---- building blocks ----

template <typename T>
Var<T> gru_cell(Var<T> x, Var<T> h, const GruWeights<T>& w) {
  const std::size_t H = h.shape().cols;
  if (x.shape().rows != h.shape().rows) {
    throw InvalidArgument("gru_cell: shape mismatch " + x.shape().str() + " vs " + h.shape().str());
  }
  const Var<T> xh_parts[] = {x, h};
  const Var<T> zr = ad::sigmoid(ad::add_bias(ad::matmul(ad::concat_cols<T>(xh_parts), w.w_zr), w.b_zr));
  const Var<T> z = ad::slice_cols(zr, 0, H);
  const Var<T> r = ad::slice_cols(zr, H, H);
  const Var<T> xrh_parts[] = {x, ad::mul(r, h)};
  const Var<T> cand = ad::tanh(ad::add_bias(ad::matmul(ad::concat_cols<T>(xrh_parts), w.w_h), w.b_h));
  return ad::add(cand, ad::mul(z, ad::sub(h, cand)));
}

template <typename T>
Attended<T> attend(Var<T> s, std::span<const Var<T>> encoder_outputs, std::span<const T> mask,
                   const AttentionWeights<T>& w, std::span<const Var<T>> projected) {
  const std::size_t S = encoder_outputs.size();
  if (S == 0) throw InvalidArgument("attend: no encoder outputs");
  const std::size_t P = s.shape().rows;
  if (mask.size() != P * S) throw InvalidArgument("attend: mask must be [P, S]");
  bool any_pad = false;
  for (std::size_t p = 0; p < P; ++p) {
    bool any = false;
    for (std::size_t t = 0; t < S; ++t) {
      if (mask[p * S + t] != T(0)) any = true;
      else any_pad = true;
    }
    if (!any) throw InvalidArgument("attend: all source positions are padded");
  }
  ad::Tape<T>& tape = *s.tape;
  std::vector<Var<T>> scores;
  scores.reserve(S);
  if (w.kind == AttentionKind::kBilinear) {
    const Var<T> sw = ad::matmul(s, w.w);
    for (std::size_t t = 0; t < S; ++t) scores.push_back(ad::row_sum(ad::mul(sw, encoder_outputs[t])));
  } else {
    const Var<T> a = ad::matmul(s, w.w1);
    for (std::size_t t = 0; t < S; ++t) {
      const Var<T> proj = projected.empty() ? ad::matmul(encoder_outputs[t], w.w2) : projected[t];
      scores.push_back(ad::matmul(ad::tanh(ad::add(a, proj)), w.v));
    }
  }
  Var<T> logits = ad::concat_cols<T>(scores);
  if (any_pad) {
    std::vector<T> bias(P * S);
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = mask[i] != T(0) ? T(0) : T(-1e9);
    logits = ad::add(logits, tape.constant(Shape{P, S}, std::move(bias)));
  }
  const Var<T> alpha = ad::softmax(logits);
  Var<T> context = ad::mul_col(encoder_outputs[0], ad::slice_cols(alpha, 0, 1));
  for (std::size_t t = 1; t < S; ++t) {
    context = ad::add(context, ad::mul_col(encoder_outputs[t], ad::slice_cols(alpha, t, 1)));
  }
  return {context, alpha};
}

template <typename T>
Var<T> mlp_logits(Var<T> x, std::span<const Var<T>> layers) {
  if (layers.size() < 2 || layers.size() % 2 != 0) throw InvalidArgument("mlp_logits: bad layer list");
  for (std::size_t i = 0; i + 2 <= layers.size(); i += 2) {
    x = ad::add_bias(ad::matmul(x, layers[i]), layers[i + 1]);
    if (i + 2 < layers.size()) x = ad::relu(x);
  }
  return x;
}

int predict_instance(std::span<const double> option_scores) {
  if (option_scores.empty()) throw InvalidArgument("predict_instance: no options");
  return argmax_lowest(option_scores);
}

// ---- whole-model passes ----

namespace {

template <typename T>
std::vector<Var<T>> mlp_vars(ad::Tape<T>& tape, const std::string& prefix, std::size_t hidden) {
  std::vector<Var<T>> out;
  for (std::size_t i = 0; i < hidden; ++i) {
    out.push_back(tape.param(prefix + ".l" + std::to_string(i) + ".W"));
    out.push_back(tape.param(prefix + ".l" + std::to_string(i) + ".b"));
  }
  out.push_back(tape.param(prefix + ".out.W"));
  out.push_back(tape.param(prefix + ".out.b"));
  return out;
}

template <typename T>
GruWeights<T> gru_vars(ad::Tape<T>& tape, const std::string& prefix) {
  return {tape.param(prefix + ".w_zr"), tape.param(prefix + ".b_zr"), tape.param(prefix + ".w_h"),
          tape.param(prefix + ".b_h")};
}

template <typename T>
struct HybridWeights {
  Var<T> embed_src, embed_tgt;
  std::vector<GruWeights<T>> enc, dec;
  AttentionWeights<T> att;
  Var<T> wc, bc, w_out, b_out;
  std::vector<Var<T>> head;
};

template <typename T>
HybridWeights<T> hybrid_vars(ad::Tape<T>& tape, const ModelConfig& cfg) {
  HybridWeights<T> w;
  if (cfg.tied_embeddings) {
    w.embed_src = w.embed_tgt = tape.param("embed");
  } else {
    w.embed_src = tape.param("embed.src");
    w.embed_tgt = tape.param("embed.tgt");
  }
  for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
    w.enc.push_back(gru_vars(tape, "enc.l" + std::to_string(l)));
    w.dec.push_back(gru_vars(tape, "dec.l" + std::to_string(l)));
  }
  w.att.kind = cfg.attention;
  if (cfg.attention == AttentionKind::kBilinear) {
    w.att.w = tape.param("att.W");
  } else {
    w.att.w1 = tape.param("att.W1");
    w.att.w2 = tape.param("att.W2");
    w.att.v = tape.param("att.v");
  }
  w.wc = tape.param("out.Wc");
  w.bc = tape.param("out.bc");
  w.w_out = tape.param("out.W");
  w.b_out = tape.param("out.b");
  w.head = mlp_vars(tape, "head", cfg.head_hidden.size());
  return w;
}

template <typename T>
Var<T> zeros(ad::Tape<T>& tape, std::size_t rows, std::size_t cols) {
  return tape.constant(Shape{rows, cols}, std::vector<T>(rows * cols, T(0)));
}

// One recurrent step through the GRU stack. Rows whose `active` flag is off
// keep their previous state.
template <typename T>
void stack_step(ad::Tape<T>& tape, Var<T> x, std::vector<Var<T>>& states,
                const std::vector<GruWeights<T>>& layers, const std::vector<char>& active) {
  const std::size_t rows = x.shape().rows;
  const std::size_t H = states[0].shape().cols;
  const bool all = std::all_of(active.begin(), active.end(), [](char a) { return a != 0; });
  std::optional<Var<T>> mask;
  if (!all) {
    std::vector<T> m(rows * H);
    for (std::size_t r = 0; r < rows; ++r) std::fill_n(m.begin() + r * H, H, active[r] ? T(1) : T(0));
    mask = tape.constant(Shape{rows, H}, std::move(m));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Var<T> next = gru_cell(x, states[l], layers[l]);
    states[l] = all ? next : ad::add(states[l], ad::mul(*mask, ad::sub(next, states[l])));
    x = states[l];
  }
}

template <typename T>
struct Encoded {
  std::vector<Var<T>> outputs;  // per position, [B, H]
  std::vector<Var<T>> finals;   // per layer, [B, H]
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;
};

template <typename T>
Encoded<T> run_encoder(ad::Tape<T>& tape, const HybridWeights<T>& w, const ModelConfig& cfg,
                       const std::vector<std::span<const TokenId>>& articles) {
  Encoded<T> enc;
  const std::size_t B = articles.size();
  for (const auto& a : articles) {
    const std::size_t n = effective_length(a);
    if (n == 0) throw InvalidArgument("hybrid: article has no tokens");
    enc.lengths.push_back(n);
    enc.max_len = std::max(enc.max_len, n);
  }
  std::vector<Var<T>> states(cfg.gru_layers, zeros(tape, B, cfg.gru_hidden));
  std::vector<std::uint32_t> ids(B);
  std::vector<char> active(B);
  for (std::size_t t = 0; t < enc.max_len; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      active[b] = t < enc.lengths[b];
      ids[b] = active[b] ? articles[b][t] : Vocabulary::kPad;
    }
    stack_step(tape, ad::embedding_gather<T>(w.embed_src, ids), states, w.enc, active);
    enc.outputs.push_back(states.back());
  }
  enc.finals = states;
  return enc;
}

template <typename T>
Var<T> decoder_output(const HybridWeights<T>& w, Var<T> top, Var<T> context) {
  const Var<T> parts[] = {top, context};
  return ad::tanh(ad::add_bias(ad::matmul(ad::concat_cols<T>(parts), w.wc), w.bc));
}

// Mean over active rows of a sequence of [R, H] matrices, weighted per row.
template <typename T>
Var<T> masked_mean(ad::Tape<T>& tape, const std::vector<Var<T>>& seq,
                   const std::vector<std::size_t>& lengths) {
  const std::size_t R = lengths.size();
  std::optional<Var<T>> acc;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<T> wts(R);
    for (std::size_t r = 0; r < R; ++r) wts[r] = t < lengths[r] ? T(1) / static_cast<T>(lengths[r]) : T(0);
    const Var<T> term = ad::mul_col(seq[t], tape.constant(Shape{R, 1}, std::move(wts)));
    acc = acc ? ad::add(*acc, term) : term;
  }
  return *acc;
}

template <typename T>
BatchOutput<T> forward_hybrid(ad::Tape<T>& tape, const ModelConfig& cfg,
                              std::span<const EncodedInstance* const> batch,
                              const ForwardOptions& opts) {
  const HybridWeights<T> w = hybrid_vars(tape, cfg);
  const std::size_t B = batch.size();

  std::vector<std::span<const TokenId>> articles;
  std::vector<std::uint32_t> inst_of_pair, labels, gold_rows;
  std::vector<std::span<const TokenId>> titles;
  for (std::size_t i = 0; i < B; ++i) {
    articles.emplace_back(batch[i]->article);
    for (std::size_t k = 0; k < batch[i]->options.size(); ++k) {
      if (k == batch[i]->gold) gold_rows.push_back(static_cast<std::uint32_t>(titles.size()));
      inst_of_pair.push_back(static_cast<std::uint32_t>(i));
      labels.push_back(k == batch[i]->gold ? 1u : 0u);
      titles.emplace_back(batch[i]->options[k]);
    }
  }
  const std::size_t P = titles.size();
  const double norm = opts.normalizer > 0 ? opts.normalizer : static_cast<double>(P);

  Encoded<T> enc = run_encoder(tape, w, cfg, articles);
  const std::size_t S = enc.max_len;

  // Encoder side expanded to pairs.
  std::vector<Var<T>> ep(S), proj;
  for (std::size_t t = 0; t < S; ++t) ep[t] = ad::embedding_gather<T>(enc.outputs[t], inst_of_pair);
  if (cfg.attention == AttentionKind::kTanh) {
    for (std::size_t t = 0; t < S; ++t) proj.push_back(ad::matmul(ep[t], w.att.w2));
  }
  std::vector<T> att_mask(P * S);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t t = 0; t < S; ++t) att_mask[p * S + t] = t < enc.lengths[inst_of_pair[p]] ? T(1) : T(0);
  }

  std::vector<std::size_t> dec_len(P);
  std::size_t L = 0;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t m = effective_length(titles[p]);
    if (m == 0) throw InvalidArgument("hybrid: option has no tokens");
    dec_len[p] = m + 1;
    L = std::max(L, dec_len[p]);
  }

  std::vector<Var<T>> states;
  for (const Var<T>& f : enc.finals) states.push_back(ad::embedding_gather<T>(f, inst_of_pair));
  BatchOutput<T> out;
  std::vector<Var<T>> dec_out;
  std::vector<std::uint32_t> ids(P);
  std::vector<char> active(P);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t p = 0; p < P; ++p) {
      active[p] = l < dec_len[p];
      ids[p] = !active[p] ? Vocabulary::kPad : l == 0 ? Vocabulary::kBos : titles[p][l - 1];
    }
    stack_step(tape, ad::embedding_gather<T>(w.embed_tgt, ids), states, w.dec, active);
    const Attended<T> att = attend<T>(states.back(), ep, att_mask, w.att, proj);
    dec_out.push_back(decoder_output(w, states.back(), att.context));
    if (opts.keep_trace) out.trace.attention.push_back(att.alpha);
  }

  Var<T> pooled_e, pooled_d;
  if (cfg.pooling == Pooling::kMean) {
    pooled_e = ad::embedding_gather<T>(masked_mean(tape, enc.outputs, enc.lengths), inst_of_pair);
    pooled_d = masked_mean(tape, dec_out, dec_len);
  } else {
    pooled_e = ad::embedding_gather<T>(enc.finals.back(), inst_of_pair);
    pooled_d = states.back();
  }
  const Var<T> head_in_parts[] = {pooled_e, pooled_d};
  const Var<T> logp = ad::log_softmax(mlp_logits<T>(ad::concat_cols<T>(head_in_parts), w.head));
  out.class_loss = ad::scale(ad::sum(ad::pick<T>(logp, labels)), static_cast<T>(-1.0 / norm));

  const bool want_gen = (cfg.lambda_gen > 0 || opts.keep_trace) && !gold_rows.empty();
  if (want_gen) {
    const std::size_t G = gold_rows.size();
    std::vector<Var<T>> rows;
    std::vector<std::uint32_t> targets(L * G);
    std::vector<T> valid(L * G);
    for (std::size_t l = 0; l < L; ++l) {
      rows.push_back(ad::embedding_gather<T>(dec_out[l], gold_rows));
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t p = gold_rows[g];
        const std::size_t m = dec_len[p] - 1;
        targets[l * G + g] = l < m ? titles[p][l] : l == m ? Vocabulary::kEos : Vocabulary::kPad;
        valid[l * G + g] = l <= m ? T(1) : T(0);
        if (l <= m) ++out.gold_tokens;
      }
    }
    const Var<T> stacked = ad::concat_rows<T>(rows);
    const Var<T> vocab_logits =
        ad::add_bias(ad::matmul_bt(ad::matmul(stacked, w.w_out), w.embed_tgt), w.b_out);
    const Var<T> lsm = ad::log_softmax(vocab_logits);
    const Var<T> picked = ad::mul(ad::pick<T>(lsm, targets), tape.constant(Shape{L * G, 1}, std::move(valid)));
    out.gen_loss = ad::scale(ad::sum(picked), static_cast<T>(-1.0 / norm));
    out.vocab_log_probs = lsm;
    out.loss = cfg.lambda_gen > 0
                   ? ad::add(out.class_loss, ad::scale(out.gen_loss, static_cast<T>(cfg.lambda_gen)))
                   : ad::add(out.class_loss, ad::scale(out.gen_loss, T(0)));
  } else {
    out.gen_loss = zeros(tape, 1, 1);
    out.loss = out.class_loss;
  }

  const std::span<const T> lp = logp.value();
  std::size_t p = 0;
  for (std::size_t i = 0; i < B; ++i) {
    std::vector<double> scores;
    for (std::size_t k = 0; k < batch[i]->options.size(); ++k, ++p) {
      scores.push_back(std::exp(static_cast<double>(lp[p * 2 + 1])));
    }
    out.option_scores.push_back(std::move(scores));
  }
  out.pairs = P;
  if (opts.keep_trace) {
    out.trace.encoder_outputs = enc.outputs;
    out.trace.decoder_outputs = dec_out;
  }
  return out;
}

// Mean-pooled embeddings of several sequences as one gather and one matmul
// with a constant pooling matrix; returns [sequences, E].
template <typename T>
Var<T> pooled_embeddings(ad::Tape<T>& tape, Var<T> embed,
                         const std::vector<std::span<const TokenId>>& seqs) {
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> lens;
  for (const auto& s : seqs) {
    const std::size_t n = effective_length(s);
    if (n == 0) throw InvalidArgument("ffnn: empty token sequence");
    ids.insert(ids.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
    lens.push_back(n);
  }
  std::vector<T> pool(seqs.size() * ids.size(), T(0));
  std::size_t off = 0;
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    for (std::size_t k = 0; k < lens[r]; ++k) pool[r * ids.size() + off + k] = T(1) / static_cast<T>(lens[r]);
    off += lens[r];
  }
  return ad::matmul(tape.constant(Shape{seqs.size(), ids.size()}, std::move(pool)),
                    ad::embedding_gather<T>(embed, ids));
}

template <typename T>
BatchOutput<T> forward_ffnn(ad::Tape<T>& tape, const ModelConfig& cfg,
                            std::span<const EncodedInstance* const> batch, const ForwardOptions& opts) {
  const Var<T> embed = tape.param("embed");
  const std::vector<Var<T>> layers = mlp_vars(tape, "ffnn", cfg.ffnn_hidden.size());
  BatchOutput<T> out;
  std::vector<std::span<const TokenId>> articles;
  for (const EncodedInstance* e : batch) articles.emplace_back(e->article);
  const Var<T> art = pooled_embeddings(tape, embed, articles);

  if (cfg.kind == ModelKind::kFfnn) {
    std::vector<std::span<const TokenId>> titles;
    std::vector<std::uint32_t> inst_of_pair, labels;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t k = 0; k < batch[i]->options.size(); ++k) {
        titles.emplace_back(batch[i]->options[k]);
        inst_of_pair.push_back(static_cast<std::uint32_t>(i));
        labels.push_back(k == batch[i]->gold ? 1u : 0u);
      }
    }
    const std::size_t P = titles.size();
    const double norm = opts.normalizer > 0 ? opts.normalizer : static_cast<double>(P);
    const Var<T> parts[] = {ad::embedding_gather<T>(art, inst_of_pair),
                            pooled_embeddings(tape, embed, titles)};
    const Var<T> logp = ad::log_softmax(mlp_logits<T>(ad::concat_cols<T>(parts), layers));
    out.class_loss = ad::scale(ad::sum(ad::pick<T>(logp, labels)), static_cast<T>(-1.0 / norm));
    const std::span<const T> lp = logp.value();
    std::size_t p = 0;
    for (const EncodedInstance* e : batch) {
      std::vector<double> scores;
      for (std::size_t k = 0; k < e->options.size(); ++k, ++p) {
        scores.push_back(std::exp(static_cast<double>(lp[p * 2 + 1])));
      }
      out.option_scores.push_back(std::move(scores));
    }
    out.pairs = P;
  } else {
    std::vector<Var<T>> parts = {art};
    std::vector<std::uint32_t> labels;
    for (std::size_t k = 0; k < 5; ++k) {
      std::vector<std::span<const TokenId>> titles;
      for (const EncodedInstance* e : batch) {
        if (e->options.size() != 5) {
          throw InvalidArgument("ffnn5 needs exactly 5 options, instance " + e->id + " has " +
                                std::to_string(e->options.size()));
        }
        titles.emplace_back(e->options[k]);
      }
      parts.push_back(pooled_embeddings(tape, embed, titles));
    }
    for (const EncodedInstance* e : batch) labels.push_back(static_cast<std::uint32_t>(e->gold));
    const double norm = opts.normalizer > 0 ? opts.normalizer : static_cast<double>(batch.size());
    const Var<T> logp = ad::log_softmax(mlp_logits<T>(ad::concat_cols<T>(parts), layers));
    out.class_loss = ad::scale(ad::sum(ad::pick<T>(logp, labels)), static_cast<T>(-1.0 / norm));
    const std::span<const T> lp = logp.value();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<double> scores(5);
      for (std::size_t k = 0; k < 5; ++k) scores[k] = std::exp(static_cast<double>(lp[i * 5 + k]));
      out.option_scores.push_back(std::move(scores));
    }
    out.pairs = batch.size() * 5;
  }
  out.gen_loss = zeros(tape, 1, 1);
  out.loss = out.class_loss;
  return out;
}

}  // namespace

std::size_t loss_units(const ModelConfig& cfg, std::span<const EncodedInstance* const> batch) {
  if (cfg.kind == ModelKind::kFfnn5) return batch.size();
  std::size_t n = 0;
  for (const EncodedInstance* e : batch) n += e->options.size();
  return n;
}

template <typename T>
BatchOutput<T> forward_batch(ad::Tape<T>& tape, const ModelConfig& cfg,
                             std::span<const EncodedInstance* const> batch,
                             const ForwardOptions& opts) {
  if (batch.empty()) throw InvalidArgument("forward_batch: empty batch");
  for (const EncodedInstance* e : batch) {
    const bool negative_pair =
        e->gold == kNoGold && e->options.size() == 1 && cfg.kind != ModelKind::kFfnn5;
    if (e->options.empty() || (e->gold >= e->options.size() && !negative_pair)) {
      throw InvalidArgument("forward_batch: instance " + e->id + " has no valid gold option");
    }
  }
  if (cfg.kind == ModelKind::kHybrid) return forward_hybrid(tape, cfg, batch, opts);
  return forward_ffnn(tape, cfg, batch, opts);
}

template <typename T>
std::vector<std::vector<double>> score_instances(const ad::ParamStore<T>& store,
                                                 const ModelConfig& cfg,
                                                 std::span<const EncodedInstance> instances,
                                                 std::size_t chunk, std::size_t workers) {
  if (chunk == 0) chunk = 1;
  const std::size_t chunks = (instances.size() + chunk - 1) / chunk;
  std::vector<std::vector<double>> out(instances.size());
  ModelConfig scoring = cfg;
  scoring.lambda_gen = 0;
  parallel_chunks(chunks, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      const std::size_t lo = c * chunk, hi = std::min(instances.size(), lo + chunk);
      std::vector<const EncodedInstance*> batch;
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&instances[i]);
      ad::Tape<T> tape(&store);
      BatchOutput<T> res = forward_batch<T>(tape, scoring, batch);
      for (std::size_t i = lo; i < hi; ++i) out[i] = std::move(res.option_scores[i - lo]);
    }
  });
  return out;
}

template <typename T>
std::vector<TokenId> generate_answer(const ad::ParamStore<T>& store, const ModelConfig& cfg,
                                     std::span<const TokenId> article, std::size_t max_len) {
  if (cfg.kind != ModelKind::kHybrid) throw InvalidArgument("generate_answer needs the hybrid model");
  std::vector<TokenId> out;
  if (max_len == 0) return out;
  ad::Tape<T> tape(&store);
  const HybridWeights<T> w = hybrid_vars(tape, cfg);
  const Encoded<T> enc = run_encoder(tape, w, cfg, {article});
  const std::size_t S = enc.max_len;
  std::vector<Var<T>> proj;
  if (cfg.attention == AttentionKind::kTanh) {
    for (const Var<T>& e : enc.outputs) proj.push_back(ad::matmul(e, w.att.w2));
  }
  const std::vector<T> mask(S, T(1));
  std::vector<Var<T>> states = enc.finals;
  const std::vector<char> active = {1};
  TokenId prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    const std::uint32_t ids[] = {prev};
    stack_step(tape, ad::embedding_gather<T>(w.embed_tgt, ids), states, w.dec, active);
    const Attended<T> att = attend<T>(states.back(), enc.outputs, mask, w.att, proj);
    const Var<T> o = decoder_output(w, states.back(), att.context);
    const Var<T> logits = ad::add_bias(ad::matmul_bt(ad::matmul(o, w.w_out), w.embed_tgt), w.b_out);
    const std::span<const T> v = logits.value();
    TokenId best = Vocabulary::kEos;
    for (TokenId id = Vocabulary::kEos; id < v.size(); ++id) {
      if (v[id] > v[best]) best = id;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

#define MCFORGE_MODELS_INSTANTIATE(T)                                                           \
  template void init_params(ad::ParamStore<T>&, const ModelConfig&, std::uint64_t);             \
  template Var<T> gru_cell(Var<T>, Var<T>, const GruWeights<T>&);                               \
  template Attended<T> attend(Var<T>, std::span<const Var<T>>, std::span<const T>,              \
                              const AttentionWeights<T>&, std::span<const Var<T>>);             \
  template Var<T> mlp_logits(Var<T>, std::span<const Var<T>>);                                  \
  template BatchOutput<T> forward_batch(ad::Tape<T>&, const ModelConfig&,                       \
                                        std::span<const EncodedInstance* const>,                \
                                        const ForwardOptions&);                                 \
  template std::vector<std::vector<double>> score_instances(                                    \
      const ad::ParamStore<T>&, const ModelConfig&, std::span<const EncodedInstance>,           \
      std::size_t, std::size_t);                                                                \
  template std::vector<TokenId> generate_answer(const ad::ParamStore<T>&, const ModelConfig&,   \
                                                std::span<const TokenId>, std::size_t);

MCFORGE_MODELS_INSTANTIATE(float)
MCFORGE_MODELS_INSTANTIATE(double)

#undef MCFORGE_MODELS_INSTANTIATE

}  // namespace mcforge
