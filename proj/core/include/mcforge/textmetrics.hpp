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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcforge/corpus.hpp"

namespace mcforge {

struct BleuConfig {
  int max_order = 4;
  bool brevity_penalty_fixed_to_one = true;

  void validate() const;
};

/// Sentence BLEU of `candidate` against a single reference. Orders run from 1
/// to min(max_order, |candidate|) with uniform weights and clipped counts; no
/// smoothing, so any zero precision yields 0. An empty candidate scores 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            const BleuConfig& cfg = {});
double bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference,
            const BleuConfig& cfg = {});

/// A reference pre-indexed by token position, for scoring many candidates
/// against the same long text (an article) without rebuilding n-gram tables.
class IndexedReference {
 public:
  IndexedReference() = default;
  explicit IndexedReference(std::vector<TokenId> tokens);

  std::span<const TokenId> tokens() const { return tokens_; }

  /// Occurrences of the n-gram `gram` in the reference.
  std::size_t count(std::span<const TokenId> gram) const;

 private:
  std::vector<TokenId> tokens_;
  std::unordered_map<TokenId, std::vector<std::uint32_t>> positions_;
};

double bleu(std::span<const TokenId> candidate, const IndexedReference& reference,
            const BleuConfig& cfg = {});

/// ROUGE-L F-measure (beta = 1) over the longest common subsequence.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference);

}  // namespace mcforge
