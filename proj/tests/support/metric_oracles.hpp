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

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mcforge/corpus.hpp"
#include "mcforge/textmetrics.hpp"

namespace oracle {

inline std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct MetricCase {
  std::string label;
  double got = 0.0;
  double want = 0.0;
};

// Every expected value was counted by hand: clipped n-gram matches over
// candidate n-grams for orders 1..min(4, |cand|), geometric mean, BP = 1.
inline std::vector<MetricCase> bleu_hand_cases() {
  using mcforge::BleuConfig;
  using mcforge::TokenId;
  auto b = [](const std::string& cand, const std::string& ref, BleuConfig cfg = {}) {
    return mcforge::bleu(words(cand), words(ref), cfg);
  };
  BleuConfig bp;
  bp.brevity_penalty_fixed_to_one = false;
  BleuConfig two;
  two.max_order = 2;
  BleuConfig three;
  three.max_order = 3;
  const std::vector<TokenId> ids_c{5, 6, 7, 8}, ids_r{5, 6, 7, 8, 9};
  const std::vector<TokenId> rot_c{1, 2, 3, 4, 5, 6};
  const mcforge::IndexedReference rot_r(std::vector<TokenId>{3, 4, 5, 6, 1, 2});
  return {
      {"identical", b("the cat sat on the mat", "the cat sat on the mat"), 1.0},
      {"prefix of reference", b("the cat", "the cat sat"), 1.0},
      {"clipped unigrams", b("the the the the", "the cat"), 0.0},
      {"single token hit", b("cat", "the cat"), 1.0},
      {"single token miss", b("dog", "the cat"), 0.0},
      {"empty candidate", b("", "the cat"), 0.0},
      {"no trigram", b("the cat sat", "the cat ate"), 0.0},
      {"no 4-gram", b("a b c d", "a b c e"), 0.0},
      {"one substitution at the end", b("a b c d e", "a b c d f"),
       std::pow(4.0 / 5 * 3.0 / 4 * 2.0 / 3 * 1.0 / 2, 0.25)},
      {"repeated bigram", b("a b a b", "a b"), 0.0},
      {"repeat inside reference", b("a b a", "a b a b"), 1.0},
      {"swapped pair", b("x y", "y x"), 0.0},
      {"rotation", b("a b c d e f", "c d e f a b"), std::pow(1.0 * 4.0 / 5 * 2.0 / 4 * 1.0 / 3, 0.25)},
      {"brevity penalty on", b("a b", "a b c d", bp), std::exp(1.0 - 4.0 / 2.0)},
      {"max order 2", b("a b c d", "a b x d", two), 0.5},
      {"reordered sentence", b("the cat is on the mat", "there is a cat on the mat"), 0.0},
      {"max order 3 with repeats", b("a b c b c", "a b c", three), std::cbrt(3.0 / 5 * 2.0 / 4 * 1.0 / 3)},
      {"token ids", mcforge::bleu(ids_c, ids_r), 1.0},
      {"indexed reference rotation", mcforge::bleu(rot_c, rot_r), std::pow(2.0 / 15.0, 0.25)},
      {"middle substitution", b("a b c d e f g h", "a b c d x f g h"), 0.5},
  };
}

// Exhaustive recursion with memo: a different formulation from the rolling
// two-row table in the library.
inline std::size_t lcs(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) return 0;
    int& m = memo[i][j];
    if (m >= 0) return m;
    if (a[i] == b[j]) return m = 1 + go(i + 1, j + 1);
    return m = std::max(go(i + 1, j), go(i, j + 1));
  };
  return static_cast<std::size_t>(go(0, 0));
}

/// Twenty random sequence pairs over a 5-token alphabet.
inline std::vector<MetricCase> rouge_random_cases(std::uint64_t seed = 11) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> len(1, 14), tok(0, 4);
  std::vector<MetricCase> out;
  for (int t = 0; t < 20; ++t) {
    std::vector<int> a(static_cast<std::size_t>(len(gen))), r(static_cast<std::size_t>(len(gen)));
    for (auto& x : a) x = tok(gen);
    for (auto& x : r) x = tok(gen);
    const double l = static_cast<double>(lcs(a, r));
    const double p = l / static_cast<double>(a.size());
    const double rc = l / static_cast<double>(r.size());
    const double want = l == 0 ? 0.0 : 2 * p * rc / (p + rc);
    const std::vector<mcforge::TokenId> ca(a.begin(), a.end()), cr(r.begin(), r.end());
    out.push_back({"case " + std::to_string(t), mcforge::rouge_l(ca, cr), want});
  }
  return out;
}

/// Standard deviation of the mean of independent Beta(1 + c_k, 1 + t_k - c_k),
/// closed form.
inline double balanced_acc_sd_closed(const std::vector<std::size_t>& correct,
                                     const std::vector<std::size_t>& total) {
  double var = 0.0;
  for (std::size_t k = 0; k < correct.size(); ++k) {
    const double a = 1.0 + static_cast<double>(correct[k]);
    const double b = 1.0 + static_cast<double>(total[k] - correct[k]);
    var += a * b / ((a + b) * (a + b) * (a + b + 1));
  }
  return std::sqrt(var) / static_cast<double>(correct.size());
}

/// Same quantity by Monte Carlo, drawing each Beta as a ratio of gammas.
inline double balanced_acc_sd_mc(const std::vector<std::size_t>& correct,
                                 const std::vector<std::size_t>& total, int draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  double s1 = 0, s2 = 0;
  for (int d = 0; d < draws; ++d) {
    double mean = 0;
    for (std::size_t k = 0; k < correct.size(); ++k) {
      std::gamma_distribution<double> ga(1.0 + static_cast<double>(correct[k]));
      std::gamma_distribution<double> gb(1.0 + static_cast<double>(total[k] - correct[k]));
      const double x = ga(gen), y = gb(gen);
      mean += x / (x + y);
    }
    mean /= static_cast<double>(correct.size());
    s1 += mean;
    s2 += mean * mean;
  }
  return std::sqrt(s2 / draws - (s1 / draws) * (s1 / draws));
}

}  // namespace oracle
