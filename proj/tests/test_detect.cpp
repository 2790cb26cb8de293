// Copyright 2026 The wmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "wmlab/detect.hpp"
#include "wmlab/engines.hpp"

using namespace wmlab;

TEST_CASE("count_green") {
  const Vocabulary v8{8, 7};
  SUBCASE("frozen five-token oracle") {
    // Flags from the brute-force mask table for key 42: [F, F, T, T].
    const std::vector<Token> tokens{3, 5, 1, 6, 2};
    const auto [count, n] = count_green(tokens, 42, 0.5, v8);
    CHECK(n == 4);
    CHECK(count == 2);
  }
  SUBCASE("two tokens leave one scored position") {
    const std::vector<Token> tokens{3, 5};
    const auto [count, n] = count_green(tokens, 42, 0.5, v8);
    CHECK(n == 1);
    CHECK((count == 0 || count == 1));
  }
  SUBCASE("too short to score") {
    const std::vector<Token> tokens{3};
    CHECK_THROWS(count_green(tokens, 42, 0.5, v8));
  }
  SUBCASE("matches the generator's own flags") {
    Mix64Stream rng(1);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 16);
    const SrlParams params{0.5, 1.5, 777, 100};
    const GenerationTrace trace = srl_generate(lm, {}, params, 12);
    const auto tokens = trace.effective_tokens();
    const auto [count, n] = count_green(tokens, params.key, params.gamma, lm.vocabulary());
    int recorded = 0;
    for (int t = 1; t < trace.effective_len; ++t) {
      recorded += trace.steps[static_cast<std::size_t>(t)].green ? 1 : 0;
    }
    CHECK(count == recorded);
    CHECK(n == trace.effective_len - 1);
  }
}

TEST_CASE("z score") {
  CHECK(z_score(50, 100, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(z_score(75, 100, 0.5) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(z_score(100, 100, 0.5) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS(z_score(1, 0, 0.5));
  CHECK_THROWS(z_score(1, 10, 0.0));
}

TEST_CASE("binomial p-value edge cases") {
  CHECK(binom_p_value(0, 50, 0.5) == 1.0);
  CHECK(binom_p_value(10, 10, 0.5) == doctest::Approx(0.0009765625).epsilon(1e-13));
  CHECK_THROWS(binom_p_value(-1, 10, 0.5));
  CHECK_THROWS(binom_p_value(11, 10, 0.5));
}

TEST_CASE("green detectors on watermarked output") {
  Mix64Stream rng(2);
  const MarkovLM lm = testutil::random_markov_nonterm(rng, 16);
  DualGaParams params;
  params.gamma = 0.5;
  params.delta_target = 0.4;
  params.eta = 0.5;
  params.lambda_init = 2.2;
  params.key = 31;
  params.t_max = 200;
  const GenerationTrace trace = dualga_generate(lm, {}, params, 8);
  const auto tokens = trace.effective_tokens();

  const DetectionReport bin =
      detect_green_binomial(tokens, params.key, params.gamma, lm.vocabulary(), 1e-4);
  CHECK(bin.decision);
  CHECK(bin.p_value < 1e-10);
  CHECK(bin.n_effective == trace.effective_len - 1);

  const DetectionReport z =
      detect_green_z(tokens, params.key, params.gamma, lm.vocabulary(), 1e-4);
  CHECK(z.decision);
  CHECK(z.score > 4.0);

  // A mismatched key returns to the null.
  const DetectionReport wrong =
      detect_green_binomial(tokens, params.key ^ 1, params.gamma, lm.vocabulary(), 1e-4);
  CHECK_FALSE(wrong.decision);
}

TEST_CASE("ems detector") {
  SUBCASE("replays the generator's r values") {
    Mix64Stream rng(3);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 32);
    EmsParams params{1.2, 424243, 150};
    const GenerationTrace trace = ems_generate(lm, {}, params);
    const DetectionReport hit =
        ems_p_value(trace.effective_tokens(), params.key, lm.vocabulary(), 1e-4);
    CHECK(hit.decision);
    CHECK(hit.p_value < 1e-8);
    const DetectionReport miss =
        ems_p_value(trace.effective_tokens(), params.key ^ 5, lm.vocabulary(), 1e-4);
    CHECK_FALSE(miss.decision);
  }
  SUBCASE("score is the centered and scaled sum") {
    const std::vector<Token> tokens{1, 2, 3};
    const DetectionReport r = ems_p_value(tokens, 9, Vocabulary{8, 7}, 0.5);
    double s = 0.0;
    Token prev = initial_token(9, Vocabulary{8, 7});
    for (const Token y : tokens) {
      s += -std::log1p(-ems_r_value(9, prev, y));
      prev = y;
    }
    CHECK(r.score == doctest::Approx((s - 3.0) / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(r.n_effective == 3);
  }
  SUBCASE("null p-values are roughly uniform") {
    Mix64Stream rng(4);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 64);
    std::vector<double> pvals;
    for (int i = 0; i < 1000; ++i) {
      const PlainParams params{0.5, 1, mix64(0x9999 ^ static_cast<std::uint64_t>(i)), 100};
      const GenerationTrace trace = plain_generate(lm, {}, params);
      pvals.push_back(ems_p_value(trace.effective_tokens(),
                                  mix64(0x4444 ^ static_cast<std::uint64_t>(i)),
                                  lm.vocabulary(), 1e-4)
                          .p_value);
    }
    double lo = 1.0;
    double hi = 0.0;
    int below_half = 0;
    for (double p : pvals) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      below_half += p < 0.5 ? 1 : 0;
    }
    CHECK(lo < 0.10);
    CHECK(hi > 0.90);
    CHECK(below_half > 400);
    CHECK(below_half < 600);
  }
}

TEST_CASE("autocov detector") {
  const Vocabulary v16{16, 15};
  const std::uint64_t key = 77;
  const double gamma = 0.5;

  // Construct color-controlled sequences by picking tokens with the desired
  // flag from each step's recomputed mask.
  const auto pick = [&](Token prev, bool want_green) {
    const GreenMask mask = partition(key, prev, gamma, v16);
    for (Token k = 0; k < 16; ++k) {
      if (mask.green(k) == want_green) return k;
    }
    return Token{0};
  };

  SUBCASE("perfectly alternating colors at T = 100") {
    std::vector<Token> tokens;
    Token prev = initial_token(key, v16);
    bool want = true;
    for (int t = 0; t < 100; ++t) {
      const Token y = pick(prev, want);
      tokens.push_back(y);
      prev = y;
      want = !want;
    }
    const DetectionReport r = autocov_p_value(tokens, key, gamma, v16, 1e-4);
    // (1/T) * 99 * (-0.25) and sqrt(T) S_T / (gamma (1 - gamma)).
    CHECK(r.score == doctest::Approx(-9.9).epsilon(1e-9));
    CHECK(r.p_value < 1e-20);
    CHECK(r.decision);
  }
  SUBCASE("all-green sequences sit in the upper tail") {
    std::vector<Token> tokens;
    Token prev = initial_token(key, v16);
    for (int t = 0; t < 100; ++t) {
      const Token y = pick(prev, true);
      tokens.push_back(y);
      prev = y;
    }
    const DetectionReport r = autocov_p_value(tokens, key, gamma, v16, 1e-4);
    CHECK(r.score > 0.0);
    CHECK(r.p_value > 0.5);
    CHECK_FALSE(r.decision);
  }
  SUBCASE("detects its own engine's output") {
    Mix64Stream rng(5);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 16);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.4;
    params.eta = 0.5;
    params.lambda_init = 2.0;
    params.key = key;
    params.t_max = 400;
    const GenerationTrace trace = autocov_generate(lm, {}, params, 21);
    const DetectionReport r =
        autocov_p_value(trace.effective_tokens(), key, 0.5, lm.vocabulary(), 1e-4);
    CHECK(r.decision);
  }
  SUBCASE("needs at least three tokens") {
    CHECK_THROWS(autocov_p_value(std::vector<Token>{1, 2}, key, gamma, v16, 0.5));
  }
}

TEST_CASE("error bounds") {
  SUBCASE("type I") {
    CHECK(alpha_bound(0.5, 0.0) == 1.0);
    CHECK(alpha_bound(0.5, 4.0) == doctest::Approx(std::exp(-8.0)).epsilon(1e-12));
    CHECK(alpha_bound(1e-12, 9.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("type II") {
    // Boundary: the squared base vanishes.
    const double z0 = 0.3 * std::sqrt(199.0) / 0.5;
    CHECK(beta_bound(0.3, 200, 0.5, z0) == 1.0);
    CHECK(beta_bound(0.0, 200, 0.5, 4.0) == 1.0);
    CHECK(beta_bound(0.3, 200, 0.5, 4.292) == doctest::Approx(1.660925317e-4).epsilon(1e-6));
    CHECK_THROWS(beta_bound(0.3, 1, 0.5, 1.0));
  }
  SUBCASE("attack-adjusted targets") {
    CHECK(adjusted_delta(AttackKind::deletion, 0.3, 0.5, 0.2, 100) ==
          doctest::Approx(0.25).epsilon(1e-12));
    CHECK(adjusted_delta(AttackKind::insertion, 0.3, 0.5, 0.0, 100) ==
          doctest::Approx(0.29).epsilon(1e-12));
    CHECK(adjusted_delta(AttackKind::substitution, 0.3, 0.5, 0.0, 1000000000) ==
          doctest::Approx(0.3).epsilon(1e-8));
    // Negative adjustments mean the guarantee is gone, not an error.
    CHECK(adjusted_delta(AttackKind::deletion, 0.1, 0.1, 0.5, 100) < 0.0);
    CHECK_THROWS(adjusted_delta(AttackKind::deletion, 0.3, 0.5, 1.0, 100));
  }
}

TEST_CASE("method names round trip") {
  for (const auto m : {DetectMethod::green_z, DetectMethod::green_binomial,
                       DetectMethod::ems_gamma, DetectMethod::autocov_normal}) {
    CHECK(detect_method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS(detect_method_from_string("nope"));
}
