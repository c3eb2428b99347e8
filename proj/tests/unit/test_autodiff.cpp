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


#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "mcforge/autodiff.hpp"
#include "mcforge/error.hpp"

using mcforge::ad::Shape;
using mcforge::ad::Tape;
using mcforge::ad::Var;
namespace ad = mcforge::ad;

using gradcheck::Inputs;
using gradcheck::OpFn;
using gradcheck::kSeeds;
using gradcheck::random_values;

TEST_CASE("softmax of zeros is uniform and rows sum to one") {
  Tape<double> t;
  auto y = ad::softmax(t.constant({1, 5}, std::vector<double>(5, 0.0)));
  for (double v : y.value()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

  std::mt19937_64 rng(9);
  auto x = t.constant({4, 7}, random_values(28, rng, -30, 30));
  auto s = ad::softmax(x).value();
  for (int r = 0; r < 4; ++r) {
    double total = 0;
    for (int c = 0; c < 7; ++c) total += s[r * 7 + c];
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("sigmoid derivative at zero is a quarter") {
  Tape<double> t;
  auto x = t.variable({1, 1}, {0.0});
  t.backward(ad::sigmoid(x));
  CHECK(t.grad(x)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sum gives a gradient of ones; unused parameters get zeros") {
  ad::ParamStore<double> store;
  store.add("used", {2, 3});
  store.add("unused", {4, 1});
  Tape<double> t(&store);
  auto g = t.backward(ad::sum(t.param("used")));
  REQUIRE(g.size() == 2);
  CHECK(g[0] == std::vector<double>(6, 1.0));
  CHECK(g[1] == std::vector<double>(4, 0.0));
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tape<double> t;
  auto x = t.variable({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(t.backward(x), mcforge::InvalidArgument);
}

TEST_CASE("shape errors name both shapes") {
  Tape<double> t;
  auto a = t.constant({2, 3}, std::vector<double>(6));
  auto b = t.constant({4, 5}, std::vector<double>(20));
  try {
    ad::matmul(a, b);
    FAIL("expected an error");
  } catch (const mcforge::InvalidArgument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x5]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, b), mcforge::InvalidArgument);
  CHECK_THROWS_AS(ad::mul(a, b), mcforge::InvalidArgument);
}

TEST_CASE("every op matches central differences in 64-bit") {
  for (const auto& c : gradcheck::op_cases()) {
    for (std::uint64_t seed : kSeeds) {
      const double err = gradcheck::check_op(c.fn, c.shapes, seed, c.lo, c.hi);
      INFO(c.name << " seed " << seed << " err " << err);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("a reused node accumulates gradient from every consumer") {
  Tape<double> t;
  auto x = t.variable({1, 3}, {1.0, -2.0, 0.5});
  auto y = ad::sum(ad::mul(x, x));  // d/dx sum x^2 = 2x
  t.backward(y);
  CHECK(t.grad(x) == std::vector<double>{2.0, -4.0, 1.0});
}

TEST_CASE("composite GRU-style step matches central differences") {
  for (std::uint64_t seed : kSeeds) {
    CAPTURE(seed);
    CHECK(gradcheck::gru_step_error(seed) < 1e-4);
  }
}

TEST_CASE("backward is deterministic across repeated calls") {
  ad::ParamStore<double> store;
  store.add("w", {4, 3});
  std::mt19937_64 rng(3);
  store.at(0).value = random_values(12, rng, -1, 1);
  Tape<double> t(&store);
  auto x = t.constant({2, 4}, random_values(8, rng, -1, 1));
  auto loss = ad::sum(ad::log_softmax(ad::matmul(x, t.param("w"))));
  const auto g1 = t.backward(loss);
  const auto g2 = t.backward(loss);
  CHECK(g1 == g2);
}

TEST_CASE("clip_global_norm") {
  SUBCASE("norm 8 with max 4 halves every value") {
    ad::Gradients<double> g = {{8.0, 0.0}, {0.0}};
    CHECK(ad::clip_global_norm(g, 4.0) == doctest::Approx(8.0));
    CHECK(g[0][0] == doctest::Approx(4.0));
  }
  SUBCASE("norm 2 with max 4 is unchanged") {
    ad::Gradients<double> g = {{1.2, -1.6}};
    ad::clip_global_norm(g, 4.0);
    CHECK(g[0] == std::vector<double>{1.2, -1.6});
  }
  SUBCASE("post-clip norm is min(pre, max)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      ad::Gradients<double> g = {random_values(7, rng, -3, 3), random_values(5, rng, -3, 3)};
      double pre = 0;
      for (auto& v : g) for (double x : v) pre += x * x;
      pre = std::sqrt(pre);
      ad::clip_global_norm(g, 4.0);
      CHECK(std::abs(ad::global_norm(g) - std::min(pre, 4.0)) < 1e-6);
    }
  }
  SUBCASE("max_norm must be positive") {
    ad::Gradients<double> g = {{1.0}};
    CHECK_THROWS_AS(ad::clip_global_norm(g, 0.0), mcforge::InvalidArgument);
  }
}

TEST_CASE("adagrad steps") {
  ad::ParamStore<double> store;
  store.add("p", {1, 2});
  store.at(0).value = {0.5, -0.25};
  ad::AdagradState<double> st;

  SUBCASE("first step with g = 1 moves by lr / (1 + eps)") {
    ad::adagrad_step(store, {{1.0, 0.0}}, st);
    CHECK(store.at(0).value[0] == doctest::Approx(0.5 - 0.01 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(store.at(0).value[1] == -0.25);  // zero grad leaves the value alone
  }
  SUBCASE("two steps equal the hand computation") {
    const double g1[] = {0.3, -2.0}, g2[] = {-0.7, 0.4};
    ad::adagrad_step(store, {{g1[0], g1[1]}}, st);
    ad::adagrad_step(store, {{g2[0], g2[1]}}, st);
    const double p0[] = {0.5, -0.25};
    for (int k = 0; k < 2; ++k) {
      const double a1 = g1[k] * g1[k];
      const double q1 = p0[k] - 0.01 * g1[k] / (std::sqrt(a1) + 1e-8);
      const double a2 = a1 + g2[k] * g2[k];
      const double q2 = q1 - 0.01 * g2[k] / (std::sqrt(a2) + 1e-8);
      CHECK(store.at(0).value[k] == doctest::Approx(q2).epsilon(1e-14));
      CHECK(st.accumulators[0][k] == doctest::Approx(a2).epsilon(1e-14));
    }
  }
}

TEST_CASE("32-bit tape agrees with 64-bit on a small network") {
  std::mt19937_64 rng(21);
  const auto xv = random_values(6, rng, -1, 1), wv = random_values(12, rng, -1, 1);
  auto run = [&](auto tag) {
    using T = decltype(tag);
    ad::ParamStore<T> store;
    store.add("w", {3, 4});
    store.at(0).value.assign(wv.begin(), wv.end());
    Tape<T> t(&store);
    auto x = t.constant({2, 3}, std::vector<T>(xv.begin(), xv.end()));
    auto loss = ad::mean(ad::tanh(ad::matmul(x, t.param("w"))));
    auto g = t.backward(loss);
    return std::vector<double>(g[0].begin(), g[0].end());
  };
  CHECK(fd::max_rel_diff(run(float{}), run(double{})) < 1e-3);
}
