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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mcforge/corpus.hpp"

namespace mcforge {

/// Paragraph-vector (PV-DBOW) training settings.
///
/// "softmax sampling" is realised as negative sampling with
/// `negative_samples` draws from the unigram^0.75 distribution; the window is
/// always the whole title. `workers > 1` enables unsynchronised (hogwild)
/// updates of the shared output table and gives up bitwise determinism.
struct PvConfig {
  int dim = 256;
  int epochs = 5;
  std::uint64_t min_count = 5;
  std::size_t max_types = 2'000'000;
  int negative_samples = 10;
  double initial_lr = 0.025;
  double final_lr = 0.0001;
  double noise_exponent = 0.75;
  std::uint64_t seed = 1;
  bool window_is_whole_title = true;
  int workers = 1;
  int infer_steps = 20;

  void validate() const;
};

/// Trained title embeddings plus the frozen output-word table used for
/// inference. Rows of `doc_vectors` follow corpus order.
struct PvModel {
  PvConfig config;
  Vocabulary vocab;
  std::vector<std::string> doc_ids;
  std::unordered_map<std::string, std::size_t> doc_index;
  std::vector<float> doc_vectors;   // num_docs x dim, row-major
  std::vector<float> word_output;   // vocab.size() x dim, row-major
  std::vector<double> epoch_loss;   // mean loss per (token, sample) per epoch

  std::size_t dim() const { return static_cast<std::size_t>(config.dim); }
  std::size_t num_docs() const { return doc_ids.size(); }
  std::span<const float> doc_vector(std::size_t row) const {
    return {doc_vectors.data() + row * dim(), dim()};
  }
  std::span<const float> doc_vector(std::string_view id) const;
  std::size_t row_of(std::string_view id) const;

  /// Content hash over config, vocabulary, ids and both tables.
  std::uint64_t fingerprint() const;
};

/// Trains PV-DBOW over the corpus titles. Throws InvalidArgument for an empty
/// corpus or when no title keeps an in-vocabulary token.
PvModel train_pv(const Corpus& corpus, const PvConfig& cfg);

struct InferResult {
  std::vector<float> vector;
  std::size_t known_tokens = 0;
  bool all_unknown = false;
};

/// Fits a fresh document vector for `tokens` with the output table frozen.
/// The initialization is seeded from the model seed and the token text, so
/// equal inputs give identical vectors; steps = 0 returns the initialization.
InferResult infer_vector(const PvModel& model, std::span<const std::string> tokens, int steps);

/// Cosine similarity, clamped to [-1, 1]. Throws on a zero vector or a
/// dimension mismatch.
double cosine(std::span<const float> u, std::span<const float> v);

struct Neighbor {
  std::string doc_id;
  double cosine = 0.0;

  bool operator==(const Neighbor&) const = default;
};

struct NeighborList {
  std::string query_id;
  std::vector<Neighbor> entries;
};

/// Exact top-N neighbors of a stored title by cosine, excluding the query;
/// ties resolve by doc id ascending.
NeighborList neighbors(const PvModel& model, std::string_view query_id, std::size_t n);

/// Top-N neighbor rows for every stored title (same ordering rule as
/// `neighbors`). Blocks of queries are scored against all rows at once.
std::vector<std::vector<std::uint32_t>> all_neighbors(const PvModel& model, std::size_t n,
                                                      std::size_t workers = 1);

void save_pv(const PvModel& model, const std::filesystem::path& path);
PvModel load_pv(const std::filesystem::path& path);

}  // namespace mcforge
