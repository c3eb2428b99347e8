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

#include "mcforge/textmetrics.hpp"

#include <algorithm>
#include <cmath>

#include "mcforge/error.hpp"

namespace mcforge {

void BleuConfig::validate() const {
  if (max_order < 1 || max_order > 9) {
    throw InvalidArgument("BLEU max_order must be in [1, 9], got " + std::to_string(max_order));
  }
}

namespace {

// `ref_count(i, n)` returns the reference count of candidate[i, i+n).
template <typename Tok, typename RefCount>
double bleu_impl(std::span<const Tok> cand, std::size_t ref_len, const BleuConfig& cfg,
                 RefCount&& ref_count) {
  cfg.validate();
  if (cand.empty()) return 0.0;
  const std::size_t orders = std::min<std::size_t>(cfg.max_order, cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    const std::size_t total = cand.size() - n + 1;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < total; ++i) {
      // Clip each distinct n-gram once, at its first occurrence.
      bool first = true;
      std::size_t cand_count = 0;
      for (std::size_t k = 0; k < total; ++k) {
        if (std::equal(cand.begin() + i, cand.begin() + i + n, cand.begin() + k)) {
          if (k < i) {
            first = false;
            break;
          }
          ++cand_count;
        }
      }
      if (!first) continue;
      matched += std::min(cand_count, ref_count(i, n));
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  double bp = 1.0;
  if (!cfg.brevity_penalty_fixed_to_one && cand.size() < ref_len) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand.size()));
  }
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(orders)), 0.0, 1.0);
}

template <typename Tok>
double bleu_plain(std::span<const Tok> cand, std::span<const Tok> ref, const BleuConfig& cfg) {
  return bleu_impl<Tok>(cand, ref.size(), cfg, [&](std::size_t i, std::size_t n) {
    std::size_t c = 0;
    if (ref.size() < n) return c;
    for (std::size_t k = 0; k + n <= ref.size(); ++k) {
      if (std::equal(cand.begin() + i, cand.begin() + i + n, ref.begin() + k)) ++c;
    }
    return c;
  });
}

template <typename Tok>
std::size_t lcs_length(std::span<const Tok> a, std::span<const Tok> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename Tok>
double rouge_impl(std::span<const Tok> cand, std::span<const Tok> ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            const BleuConfig& cfg) {
  return bleu_plain(candidate, reference, cfg);
}

double bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference,
            const BleuConfig& cfg) {
  return bleu_plain(candidate, reference, cfg);
}

IndexedReference::IndexedReference(std::vector<TokenId> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    positions_[tokens_[i]].push_back(static_cast<std::uint32_t>(i));
  }
}

std::size_t IndexedReference::count(std::span<const TokenId> gram) const {
  if (gram.empty() || gram.size() > tokens_.size()) return 0;
  auto it = positions_.find(gram.front());
  if (it == positions_.end()) return 0;
  std::size_t c = 0;
  for (std::uint32_t p : it->second) {
    if (p + gram.size() > tokens_.size()) break;
    if (std::equal(gram.begin() + 1, gram.end(), tokens_.begin() + p + 1)) ++c;
  }
  return c;
}

double bleu(std::span<const TokenId> candidate, const IndexedReference& reference,
            const BleuConfig& cfg) {
  return bleu_impl<TokenId>(candidate, reference.tokens().size(), cfg,
                            [&](std::size_t i, std::size_t n) {
                              return reference.count(candidate.subspan(i, n));
                            });
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return rouge_impl(candidate, reference);
}

double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  return rouge_impl(candidate, reference);
}

}  // namespace mcforge
