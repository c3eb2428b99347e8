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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcforge/autodiff.hpp"
#include "mcforge/corpus.hpp"
#include "mcforge/mccreate.hpp"

namespace mcforge {

enum class ModelKind { kFfnn, kFfnn5, kHybrid };
enum class AttentionKind { kTanh, kBilinear };
enum class Pooling { kMean, kFinal };

std::string to_string(ModelKind k);
std::string to_string(AttentionKind k);
std::string to_string(Pooling p);
ModelKind parse_model_kind(std::string_view s);
AttentionKind parse_attention(std::string_view s);
Pooling parse_pooling(std::string_view s);

/// Architecture hyperparameters. Field defaults are the paper-scale values;
/// `desk_model_config` gives the laptop-sized variant.
struct ModelConfig {
  ModelKind kind = ModelKind::kHybrid;
  std::size_t vocab_size = 100000;  // including the four sentinel ids
  std::size_t embed_dim = 512;
  std::vector<std::size_t> ffnn_hidden = {1024, 256};
  std::vector<std::size_t> head_hidden = {64, 16};
  std::size_t gru_layers = 2;
  std::size_t gru_hidden = 512;
  AttentionKind attention = AttentionKind::kBilinear;
  bool tied_embeddings = true;
  Pooling pooling = Pooling::kMean;
  double lambda_gen = 0.01;
  std::size_t max_article_len = 400;
  std::size_t max_title_len = 32;
  /// Uniform init range for embeddings; matrices use Glorot-uniform.
  double embed_init = 0.1;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

ModelConfig desk_model_config(ModelKind kind);

/// Parameter names and shapes in registration order, without allocating.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& cfg);
std::size_t count_parameters(const ModelConfig& cfg);

/// Registers every parameter of `cfg` in `store` and draws initial values
/// from `seed`.
template <typename T>
void init_params(ad::ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed);

/// Model vocabulary over the train split: article and option tokens, most
/// frequent first, `vocab_size` ids in total.
Vocabulary build_model_vocab(const McDataset& dataset, std::size_t vocab_size);

/// `gold` is kNoGold for a single-option negative pair (pair-level training
/// of the binary models).
inline constexpr std::size_t kNoGold = static_cast<std::size_t>(-1);

struct EncodedInstance {
  std::string id;
  std::vector<TokenId> article;
  std::vector<std::vector<TokenId>> options;
  std::size_t gold = 0;
  bool truncated = false;
};

/// Token ids with truncation to the configured lengths. Empty sequences get
/// a single <unk> so every sequence has at least one position.
EncodedInstance encode_instance(const McInstance& inst, const Vocabulary& vocab,
                                const ModelConfig& cfg);
std::vector<EncodedInstance> encode_instances(std::span<const McInstance* const> instances,
                                              const Vocabulary& vocab, const ModelConfig& cfg);

/// One single-option unit per (title, article, label) pair.
std::vector<EncodedInstance> encode_pairs(std::span<const PairExample> pairs,
                                          const Vocabulary& vocab, const ModelConfig& cfg);

/// Number of non-pad positions, ignoring trailing <pad> ids.
std::size_t effective_length(std::span<const TokenId> ids);

// ---- building blocks ----

template <typename T>
struct GruWeights {
  ad::Var<T> w_zr;  // [(in + H), 2H]: update and reset gates side by side
  ad::Var<T> b_zr;  // [1, 2H]
  ad::Var<T> w_h;   // [(in + H), H]
  ad::Var<T> b_h;   // [1, H]
};

/// z = sig(W_z[x,h] + b_z), r = sig(W_r[x,h] + b_r),
/// h~ = tanh(W_h[x, r*h] + b_h), h' = z*h + (1-z)*h~.
template <typename T>
ad::Var<T> gru_cell(ad::Var<T> x, ad::Var<T> h, const GruWeights<T>& w);

template <typename T>
struct AttentionWeights {
  AttentionKind kind = AttentionKind::kBilinear;
  ad::Var<T> w;   // bilinear: [H, H]
  ad::Var<T> w1;  // tanh: [H, A] on the decoder state
  ad::Var<T> w2;  // tanh: [H, A] on encoder outputs
  ad::Var<T> v;   // tanh: [A, 1]
};

template <typename T>
struct Attended {
  ad::Var<T> context;  // [P, H]
  ad::Var<T> alpha;    // [P, S]
};

/// Attention of decoder states `s` [P, H] over encoder outputs (one [P, H]
/// matrix per source position). `mask` is [P, S] with 1 for real positions.
/// `projected` optionally carries precomputed h_i W2 for the tanh variant.
template <typename T>
Attended<T> attend(ad::Var<T> s, std::span<const ad::Var<T>> encoder_outputs,
                   std::span<const T> mask, const AttentionWeights<T>& w,
                   std::span<const ad::Var<T>> projected = {});

/// Fully connected ReLU stack followed by a linear output layer.
/// `layers` alternates weight and bias for every layer.
template <typename T>
ad::Var<T> mlp_logits(ad::Var<T> x, std::span<const ad::Var<T>> layers);

// ---- whole-model passes ----

template <typename T>
struct Seq2seqTrace {
  std::vector<ad::Var<T>> encoder_outputs;  // per source position, [B, H]
  std::vector<ad::Var<T>> decoder_outputs;  // per target position, [P, H]
  std::vector<ad::Var<T>> attention;        // per target position, [P, S]
};

template <typename T>
struct BatchOutput {
  ad::Var<T> loss;
  ad::Var<T> class_loss;
  /// Generation NLL summed over gold target tokens, divided by the
  /// normalizer (hybrid only; a zero constant otherwise).
  ad::Var<T> gen_loss;
  /// Per instance: the yes-probability of every option (pair models) or the
  /// class distribution (ffnn5).
  std::vector<std::vector<double>> option_scores;
  /// Vocabulary log-distributions for the gold pairs, [L * G, V] with row
  /// l * G + g for target position l of gold pair g (hybrid with a
  /// generation term or a kept trace).
  std::optional<ad::Var<T>> vocab_log_probs;
  Seq2seqTrace<T> trace;
  std::size_t pairs = 0;
  std::size_t gold_tokens = 0;
};

struct ForwardOptions {
  /// Losses are sums divided by this; 0 means the number of scored units in
  /// the batch (pairs, or instances for ffnn5).
  double normalizer = 0.0;
  bool keep_trace = false;
};

/// Builds the loss for a batch on `tape` (whose store holds the parameters).
template <typename T>
BatchOutput<T> forward_batch(ad::Tape<T>& tape, const ModelConfig& cfg,
                             std::span<const EncodedInstance* const> batch,
                             const ForwardOptions& opts = {});

/// Scored units of a batch for the loss normalizer.
std::size_t loss_units(const ModelConfig& cfg, std::span<const EncodedInstance* const> batch);

/// The option with the highest score; ties go to the lowest index.
int predict_instance(std::span<const double> option_scores);

/// Option scores for each instance, evaluated in chunks without gradients.
template <typename T>
std::vector<std::vector<double>> score_instances(const ad::ParamStore<T>& store,
                                                 const ModelConfig& cfg,
                                                 std::span<const EncodedInstance> instances,
                                                 std::size_t chunk = 16, std::size_t workers = 1);

/// Greedy decoding from <s> until </s> or `max_len` tokens (hybrid only).
template <typename T>
std::vector<TokenId> generate_answer(const ad::ParamStore<T>& store, const ModelConfig& cfg,
                                     std::span<const TokenId> article, std::size_t max_len);

}  // namespace mcforge
