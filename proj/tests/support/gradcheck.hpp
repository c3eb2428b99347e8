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

// Finite-difference checks shared by the unit suites and the acceptance run.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fd_oracle.hpp"
#include "mcforge/autodiff.hpp"
#include "mcforge/mcmodels.hpp"

namespace gradcheck {

namespace ad = mcforge::ad;
using ad::Shape;
using ad::Tape;
using ad::Var;
using Inputs = std::vector<Var<double>>;
using OpFn = std::function<Var<double>(Tape<double>&, const Inputs&)>;

inline const std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Loss = sum_ij out_ij * w_ij with fixed random w, so every output element
// receives a distinct upstream gradient. Returns the max absolute error.
inline double check_op(const OpFn& op, const std::vector<Shape>& shapes, std::uint64_t seed,
                       double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> values;
  for (const Shape& s : shapes) {
    auto v = random_values(s.size(), rng, lo, hi);
    for (double& x : v) {
      if (std::abs(x) < 0.05) x += x < 0 ? -0.05 : 0.05;  // keep away from relu's kink
    }
    values.push_back(v);
  }
  std::vector<double> weights;
  auto run = [&](const std::vector<std::vector<double>>& vals, Tape<double>& tape, Inputs& in) {
    in.clear();
    for (std::size_t i = 0; i < shapes.size(); ++i) in.push_back(tape.variable(shapes[i], vals[i]));
    const Var<double> out = op(tape, in);
    if (weights.empty()) weights = random_values(out.shape().size(), rng, -1.0, 1.0);
    return ad::sum(ad::mul(out, tape.constant(out.shape(), weights)));
  };

  Tape<double> tape;
  Inputs in;
  const Var<double> loss = run(values, tape, in);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::vector<double> analytic = tape.grad(in[i]);
    auto f = [&](const std::vector<double>& x) {
      auto vals = values;
      vals[i] = x;
      Tape<double> t2;
      Inputs in2;
      return run(vals, t2, in2).item();
    };
    worst = std::max(worst, fd::max_abs_diff(analytic, fd::gradient(f, values[i])));
  }
  return worst;
}

struct OpCase {
  std::string name;
  OpFn fn;
  std::vector<Shape> shapes;
  double lo = -1, hi = 1;
};

inline std::vector<OpCase> op_cases() {
  const Shape s34{3, 4};
  const std::vector<std::uint32_t> ids = {2, 0, 2, 1};
  const std::vector<std::uint32_t> cols = {3, 0, 1};
  return {
      {"matmul", [](auto&, const Inputs& x) { return ad::matmul(x[0], x[1]); }, {s34, {4, 2}}},
      {"matmul_bt", [](auto&, const Inputs& x) { return ad::matmul_bt(x[0], x[1]); }, {s34, {5, 4}}},
      {"add", [](auto&, const Inputs& x) { return ad::add(x[0], x[1]); }, {s34, s34}},
      {"sub", [](auto&, const Inputs& x) { return ad::sub(x[0], x[1]); }, {s34, s34}},
      {"mul", [](auto&, const Inputs& x) { return ad::mul(x[0], x[1]); }, {s34, s34}},
      {"scale", [](auto&, const Inputs& x) { return ad::scale(x[0], -1.7); }, {s34}},
      {"add_bias", [](auto&, const Inputs& x) { return ad::add_bias(x[0], x[1]); }, {s34, {1, 4}}},
      {"mul_col", [](auto&, const Inputs& x) { return ad::mul_col(x[0], x[1]); }, {s34, {3, 1}}},
      {"concat_cols",
       [](auto&, const Inputs& x) { return ad::concat_cols<double>(std::span<const Var<double>>(x)); },
       {s34, {3, 2}, {3, 1}}},
      {"concat_rows",
       [](auto&, const Inputs& x) { return ad::concat_rows<double>(std::span<const Var<double>>(x)); },
       {s34, {1, 4}}},
      {"slice_cols", [](auto&, const Inputs& x) { return ad::slice_cols(x[0], 1, 2); }, {s34}},
      {"slice_rows", [](auto&, const Inputs& x) { return ad::slice_rows(x[0], 1, 2); }, {s34}},
      {"embedding_gather",
       [ids](auto&, const Inputs& x) { return ad::embedding_gather<double>(x[0], ids); }, {s34}},
      {"sigmoid", [](auto&, const Inputs& x) { return ad::sigmoid(x[0]); }, {s34}},
      {"tanh", [](auto&, const Inputs& x) { return ad::tanh(x[0]); }, {s34}},
      {"relu", [](auto&, const Inputs& x) { return ad::relu(x[0]); }, {s34}},
      {"softmax", [](auto&, const Inputs& x) { return ad::softmax(x[0]); }, {s34}},
      {"log_softmax", [](auto&, const Inputs& x) { return ad::log_softmax(x[0]); }, {s34}},
      {"log", [](auto&, const Inputs& x) { return ad::log(x[0]); }, {s34}, 0.5, 2.0},
      {"sum", [](auto&, const Inputs& x) { return ad::sum(x[0]); }, {s34}},
      {"mean", [](auto&, const Inputs& x) { return ad::mean(x[0]); }, {s34}},
      {"row_sum", [](auto&, const Inputs& x) { return ad::row_sum(x[0]); }, {s34}},
      {"pick", [cols](auto&, const Inputs& x) { return ad::pick<double>(x[0], cols); }, {s34}},
  };
}

/// h' = z*h + (1-z)*tanh(W[x, r*h]) with z, r from sigmoid gates, checked
/// input by input. Returns the worst relative error.
inline double gru_step_error(std::uint64_t seed) {
  const OpFn step = [](Tape<double>& t, const Inputs& v) {
    const Var<double> xh_parts[] = {v[0], v[1]};
    auto xh = ad::concat_cols<double>(xh_parts);
    auto z = ad::sigmoid(ad::add_bias(ad::matmul(xh, v[2]), v[3]));
    auto r = ad::sigmoid(ad::matmul(xh, v[4]));
    const Var<double> xrh_parts[] = {v[0], ad::mul(r, v[1])};
    auto cand = ad::tanh(ad::matmul(ad::concat_cols<double>(xrh_parts), v[5]));
    auto ones = t.constant({2, 3}, std::vector<double>(6, 1.0));
    return ad::add(ad::mul(z, v[1]), ad::mul(ad::sub(ones, z), cand));
  };
  std::mt19937_64 rng(seed);
  const std::vector<Shape> shapes = {{2, 4}, {2, 3}, {7, 3}, {1, 3}, {7, 3}, {7, 3}};
  std::vector<std::vector<double>> vals;
  for (const Shape& s : shapes) vals.push_back(random_values(s.size(), rng, -1, 1));
  auto loss_of = [&](const std::vector<std::vector<double>>& vv, Tape<double>& t, Inputs& in) {
    in.clear();
    for (std::size_t i = 0; i < shapes.size(); ++i) in.push_back(t.variable(shapes[i], vv[i]));
    return ad::sum(ad::tanh(step(t, in)));
  };
  Tape<double> t;
  Inputs in;
  t.backward(loss_of(vals, t, in));
  double worst = 0.0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto f = [&](const std::vector<double>& x) {
      auto vv = vals;
      vv[i] = x;
      Tape<double> t2;
      Inputs in2;
      return loss_of(vv, t2, in2).item();
    };
    worst = std::max(worst, fd::max_rel_diff(t.grad(in[i]), fd::gradient(f, vals[i])));
  }
  return worst;
}

inline mcforge::ModelConfig tiny(mcforge::ModelKind kind) {
  mcforge::ModelConfig c;
  c.kind = kind;
  c.vocab_size = 12;
  c.embed_dim = 3;
  c.gru_hidden = 3;
  c.gru_layers = 2;
  c.ffnn_hidden = {5, 4};
  c.head_hidden = {4, 3};
  c.max_article_len = 10;
  c.max_title_len = 6;
  c.lambda_gen = 0.7;
  c.embed_init = 0.5;
  return c;
}

inline std::vector<mcforge::EncodedInstance> toy_batch(std::size_t options = 5) {
  using mcforge::TokenId;
  std::vector<mcforge::EncodedInstance> b(2);
  b[0].id = "a";
  b[0].article = {4, 5, 6, 7, 8};
  b[1].id = "b";
  b[1].article = {9, 10, 4};
  for (std::size_t k = 0; k < options; ++k) {
    b[0].options.push_back({static_cast<TokenId>(4 + k), 11});
    b[1].options.push_back({static_cast<TokenId>(11 - k), 5, static_cast<TokenId>(6 + k % 3)});
  }
  b[0].gold = 2;
  b[1].gold = options - 1;
  return b;
}

inline std::vector<const mcforge::EncodedInstance*> ptrs(const std::vector<mcforge::EncodedInstance>& v) {
  std::vector<const mcforge::EncodedInstance*> out;
  for (const auto& e : v) out.push_back(&e);
  return out;
}

template <typename T>
double loss_value(const ad::ParamStore<T>& store, const mcforge::ModelConfig& cfg,
                  const std::vector<mcforge::EncodedInstance>& batch) {
  Tape<T> t(&store);
  return static_cast<double>(mcforge::forward_batch<T>(t, cfg, ptrs(batch)).loss.item());
}

// Relative error of the analytic gradient of every parameter against
// central differences of the whole-model loss.
inline double model_grad_error(const mcforge::ModelConfig& cfg, std::uint64_t seed,
                               std::size_t options = 5) {
  ad::ParamStore<double> store;
  mcforge::init_params(store, cfg, seed);
  // Non-zero biases so every path is exercised.
  std::mt19937_64 rng(seed * 7 + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (std::size_t i = 0; i < store.size(); ++i) {
    for (double& v : store.at(i).value) {
      if (v == 0.0) v = u(rng);
    }
  }
  const auto batch = toy_batch(options);
  Tape<double> t(&store);
  const auto grads = t.backward(mcforge::forward_batch<double>(t, cfg, ptrs(batch)).loss);
  std::vector<double> analytic, numeric;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto f = [&](const std::vector<double>& x) {
      const auto keep = store.at(i).value;
      store.at(i).value = x;
      const double l = loss_value(store, cfg, batch);
      store.at(i).value = keep;
      return l;
    };
    const auto g = fd::gradient(f, store.at(i).value);
    analytic.insert(analytic.end(), grads[i].begin(), grads[i].end());
    numeric.insert(numeric.end(), g.begin(), g.end());
  }
  return fd::max_rel_diff(analytic, numeric);
}

struct ModelVariant {
  std::string name;
  mcforge::ModelConfig cfg;
};

/// FFNN, FFNN5 and three hybrid variants covering both attention forms,
/// untied embeddings and final-state pooling.
inline std::vector<ModelVariant> model_variants() {
  using mcforge::ModelKind;
  std::vector<ModelVariant> v{{"ffnn", tiny(ModelKind::kFfnn)},
                              {"ffnn5", tiny(ModelKind::kFfnn5)},
                              {"hybrid", tiny(ModelKind::kHybrid)}};
  mcforge::ModelConfig h = tiny(ModelKind::kHybrid);
  h.attention = mcforge::AttentionKind::kTanh;
  h.tied_embeddings = false;
  v.push_back({"hybrid tanh untied", h});
  h.pooling = mcforge::Pooling::kFinal;
  v.push_back({"hybrid tanh untied final", h});
  return v;
}

}  // namespace gradcheck
