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
#include <filesystem>
#include <limits>

#include "test_util.hpp"
#include "wmlab/dual.hpp"
#include "wmlab/engines.hpp"

using namespace wmlab;

namespace {
constexpr double kE = 2.718281828459045;
}

TEST_CASE("apply_green_boost") {
  const Vocabulary v2{2, 1};
  SUBCASE("zero boost reproduces softmax exactly") {
    const Logits l{0.4, -1.2};
    GreenMask mask;
    mask.bits = {1, 0};
    mask.green_count = 1;
    CHECK(apply_green_boost(l, mask, 0.0) == softmax(l));
  }
  SUBCASE("uniform logits with one green index") {
    GreenMask mask;
    mask.bits = {1, 0};
    mask.green_count = 1;
    const Probs q = apply_green_boost(Logits{0.0, 0.0}, mask, 1.0);
    CHECK(q[0] == doctest::Approx(kE / (kE + 1.0)).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(1.0 / (kE + 1.0)).epsilon(1e-12));
  }
  SUBCASE("all-green boost is a uniform shift") {
    const Logits l{0.3, 1.7, -2.0};
    GreenMask mask;
    mask.bits = {1, 1, 1};
    mask.green_count = 3;
    const Probs q = apply_green_boost(l, mask, 5.0);
    const Probs p = softmax(l);
    for (std::size_t k = 0; k < q.size(); ++k) {
      CHECK(q[k] == doctest::Approx(p[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("srl generation") {
  SUBCASE("zero boost reproduces the plain sampler token for token") {
    Mix64Stream rng(100);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 12);
    const SrlParams srl{0.5, 0.0, 555, 80};
    const PlainParams plain{0.5, 555, 777, 80};
    CHECK(srl_generate(lm, {}, srl, 777).tokens == plain_generate(lm, {}, plain).tokens);
  }
  SUBCASE("uniform replay rows realize the closed-form gain at every step") {
    const ReplayLM lm = testutil::uniform_replay(4, 50);
    const SrlParams params{0.5, 1.0, 9001, 50};
    const GenerationTrace trace = srl_generate(lm, {}, params, 1);
    CHECK(trace.effective_len >= 1);
    for (int t = 0; t < trace.effective_len; ++t) {
      const auto& s = trace.steps[static_cast<std::size_t>(t)];
      CHECK(s.g_mass == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(s.dg_realized == doctest::Approx(0.2310585786300049).epsilon(1e-10));
      CHECK(s.kl_realized == doctest::Approx(0.1109440716717274).epsilon(1e-10));
    }
  }
  SUBCASE("first step is keyed by the reduced key") {
    Mix64Stream rng(101);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 8);
    const SrlParams params{0.5, 1.0, 1234567, 10};
    const GenerationTrace trace = srl_generate(lm, {}, params, 5);
    const GreenMask mask =
        partition(params.key, initial_token(params.key, lm.vocabulary()), params.gamma,
                  lm.vocabulary());
    CHECK(trace.steps[0].green == mask.green(trace.tokens[0]));
    const Probs p = softmax(lm.next_logits(Context{}));
    CHECK(trace.steps[0].g_mass == doctest::Approx(green_mass(p, mask)).epsilon(1e-12));
  }
  SUBCASE("per-step records match the closed forms on a markov model") {
    Mix64Stream rng(102);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 16);
    const SrlParams params{0.35, 2.0, 42, 60};
    const GenerationTrace trace = srl_generate(lm, {}, params, 3);
    for (int t = 0; t < trace.effective_len; ++t) {
      const auto& s = trace.steps[static_cast<std::size_t>(t)];
      CHECK(s.dg_realized ==
            doctest::Approx(dg_closed_form(s.g_mass, params.delta)).epsilon(1e-10));
      CHECK(s.kl_realized ==
            doctest::Approx(kl_closed_form(s.g_mass, params.delta)).epsilon(1e-10));
      CHECK(s.kl_realized >= 0.0);
    }
  }
}

TEST_CASE("dualga generation") {
  SUBCASE("first step uses the initial dual variable as its boost") {
    const ReplayLM lm = testutil::uniform_replay(2, 10);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.25;
    params.eta = 0.5;
    params.lambda_init = 1.0;
    params.key = 88;
    params.t_max = 10;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 2);
    CHECK(trace.steps[0].delta_used == 1.0);
    CHECK(trace.steps[0].lambda == 1.0);
  }
  SUBCASE("one-step dual update against hand arithmetic") {
    // G = 0.5 forces lambda_2 = 1 + 0.5 (0.25 - DG(0.5, 1)).
    const ReplayLM lm = testutil::uniform_replay(2, 10);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.25;
    params.eta = 0.5;
    params.lambda_init = 1.0;
    params.key = 88;
    params.t_max = 10;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 2);
    REQUIRE(trace.effective_len >= 2);
    CHECK(trace.steps[1].lambda == doctest::Approx(1.0094707106849976).epsilon(1e-12));
  }
  SUBCASE("zero target from zero start is the unwatermarked model") {
    Mix64Stream rng(103);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 12);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.0;
    params.eta = 0.5;
    params.lambda_init = 0.0;
    params.key = 11;
    params.t_max = 60;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 31);
    const PlainParams plain{0.5, 11, 31, 60};
    CHECK(trace.tokens == plain_generate(lm, {}, plain).tokens);
    for (int t = 0; t < trace.effective_len; ++t) {
      CHECK(trace.steps[static_cast<std::size_t>(t)].delta_used == 0.0);
    }
  }
  SUBCASE("rejects an infeasible target") {
    const ReplayLM lm = testutil::uniform_replay(2, 4);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.5;
    params.t_max = 4;
    CHECK_THROWS(dualga_generate(lm, {}, params, 1));
  }
}

TEST_CASE("autocov generation") {
  SUBCASE("zero boost leaves the distribution untouched") {
    Mix64Stream rng(104);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 10);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.0;
    params.eta = 0.0;
    params.lambda_init = 0.0;
    params.key = 5;
    params.t_max = 50;
    const GenerationTrace trace = autocov_generate(lm, {}, params, 9);
    for (int t = 0; t < trace.effective_len; ++t) {
      CHECK(trace.steps[static_cast<std::size_t>(t)].dg_realized == 0.0);
      CHECK(trace.steps[static_cast<std::size_t>(t)].kl_realized == 0.0);
    }
  }
  SUBCASE("first step after the red pre-token matches hand arithmetic") {
    // -DA_1 = gamma * DG(0.5, 1) = 0.11552928931500245, so with eta = 1:
    // lambda_2 = 1 + (0.25 - 0.11552928931500245).
    const ReplayLM lm = testutil::uniform_replay(2, 10);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.25;
    params.eta = 1.0;
    params.lambda_init = 1.0;
    params.key = 88;
    params.t_max = 10;
    const GenerationTrace trace = autocov_generate(lm, {}, params, 2);
    REQUIRE(trace.effective_len >= 2);
    CHECK(trace.steps[1].lambda == doctest::Approx(1.1344707106849976).epsilon(1e-12));
  }
  SUBCASE("dual increments encode the recorded gradient") {
    Mix64Stream rng(105);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 12);
    DualGaParams params;
    params.gamma = 0.4;
    params.delta_target = 0.15;
    params.eta = 0.25;
    params.lambda_init = 1.0;
    params.key = 19;
    params.t_max = 40;
    const GenerationTrace trace = autocov_generate(lm, {}, params, 77);
    bool prev_green = false;
    for (int t = 0; t + 1 < trace.effective_len; ++t) {
      const auto& cur = trace.steps[static_cast<std::size_t>(t)];
      const auto& nxt = trace.steps[static_cast<std::size_t>(t + 1)];
      const double minus_da =
          prev_green ? (1.0 - params.gamma) * dg_closed_form(1.0 - cur.g_mass, cur.delta_used)
                     : params.gamma * dg_closed_form(cur.g_mass, cur.delta_used);
      const double want = std::clamp(
          cur.lambda + params.eta * (params.delta_target - minus_da), 0.0, params.lambda_cap);
      CHECK(nxt.lambda == doctest::Approx(want).epsilon(1e-14));
      prev_green = cur.green;
    }
  }
}

TEST_CASE("ems generation") {
  SUBCASE("degenerate distribution forces the supported token") {
    // Row puts all representable mass on token 2.
    Vocabulary vocab{4, 3};
    ReplayLM lm(vocab, std::vector<Logits>(20, Logits{-2000.0, -2000.0, 0.0, -2000.0}));
    EmsParams params{1.0, 31337, 20};
    const GenerationTrace trace = ems_generate(lm, {}, params);
    for (int t = 0; t < trace.effective_len; ++t) {
      CHECK(trace.tokens[static_cast<std::size_t>(t)] == 2);
    }
  }
  SUBCASE("score rule matches a test-local argmin over replayed r values") {
    const ReplayLM lm = testutil::uniform_replay(8, 1);
    for (std::uint64_t key = 1; key <= 200; ++key) {
      EmsParams params{1.0, key, 1};
      const GenerationTrace trace = ems_generate(lm, {}, params);
      const Token prev = initial_token(key, lm.vocabulary());
      Token want = 0;
      double best = std::numeric_limits<double>::infinity();
      for (Token k = 0; k < 8; ++k) {
        const double score = -std::log(ems_r_value(key, prev, k)) / 0.125;
        if (score < best) {
          best = score;
          want = k;
        }
      }
      CHECK(trace.tokens[0] == want);
    }
  }
  SUBCASE("direct evaluation of the scoring formula") {
    // With p = [0.5, 0.5] and r = [0.9, 0.4] the scores are 0.2107 and
    // 1.8326, so token 0 wins.
    const double s0 = -std::log(0.9) / 0.5;
    const double s1 = -std::log(0.4) / 0.5;
    CHECK(s0 == doctest::Approx(0.21072103131565256).epsilon(1e-10));
    CHECK(s1 == doctest::Approx(1.832581463748310).epsilon(1e-10));
    CHECK(s0 < s1);
  }
  SUBCASE("deterministic given the key") {
    Mix64Stream rng(106);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 10);
    EmsParams params{0.8, 4242, 64};
    CHECK(ems_generate(lm, {}, params).tokens == ems_generate(lm, {}, params).tokens);
  }
  SUBCASE("per-step divergence is the negative log mass of the choice") {
    Mix64Stream rng(107);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 10);
    EmsParams params{1.0, 99, 30};
    const GenerationTrace trace = ems_generate(lm, {}, params);
    Context ctx;
    for (int t = 0; t < trace.effective_len; ++t) {
      const Probs p = softmax(lm.next_logits(ctx));
      const Token y = trace.tokens[static_cast<std::size_t>(t)];
      CHECK(trace.steps[static_cast<std::size_t>(t)].kl_realized ==
            doctest::Approx(-std::log(p[static_cast<std::size_t>(y)])).epsilon(1e-12));
      ctx.generated.push_back(y);
    }
  }
}

TEST_CASE("plain generation") {
  SUBCASE("deterministic under a fixed seed") {
    Mix64Stream rng(108);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 12);
    const PlainParams params{0.5, 3, 1717, 100};
    CHECK(plain_generate(lm, {}, params).tokens == plain_generate(lm, {}, params).tokens);
  }
  SUBCASE("no divergence is recorded") {
    Mix64Stream rng(109);
    const MarkovLM lm = testutil::random_markov_nonterm(rng, 12);
    const PlainParams params{0.5, 3, 18, 100};
    const GenerationTrace trace = plain_generate(lm, {}, params);
    for (int t = 0; t < trace.effective_len; ++t) {
      const auto& s = trace.steps[static_cast<std::size_t>(t)];
      CHECK(s.kl_realized == 0.0);
      CHECK(s.dg_realized == 0.0);
      CHECK(s.delta_used == 0.0);
    }
  }
  SUBCASE("green flags hit the green ratio on uniform rows") {
    // Uniform rows over the non-terminator tokens at gamma = 0.5: the mask
    // is half green by symmetry, so the flag rate is a fair coin and 1e5
    // steps concentrate within [0.49, 0.51].
    Vocabulary vocab{8, 7};
    Probs row(8, 1.0 / 7.0);
    row[7] = 0.0;
    std::vector<Probs> rows(8, row);
    MarkovLM lm(vocab, row, std::move(rows));
    int greens = 0;
    int steps = 0;
    for (int seq = 0; seq < 500; ++seq) {
      PlainParams params{0.5, mix64(0xABC ^ static_cast<std::uint64_t>(seq)),
                         mix64(0xF00D ^ static_cast<std::uint64_t>(seq)), 200};
      const GenerationTrace trace = plain_generate(lm, {}, params);
      for (int t = 0; t < trace.effective_len; ++t) {
        greens += trace.steps[static_cast<std::size_t>(t)].green ? 1 : 0;
        ++steps;
      }
    }
    const double freq = static_cast<double>(greens) / steps;
    CHECK(freq > 0.49);
    CHECK(freq < 0.51);
  }
}

TEST_CASE("termination and padding") {
  // Heavy terminator mass ends sequences quickly.
  Vocabulary vocab{4, 3};
  std::vector<Probs> rows(4, Probs{0.1, 0.1, 0.1, 0.7});
  const MarkovLM lm(vocab, Probs{0.25, 0.25, 0.25, 0.25}, std::move(rows));

  const SrlParams srl{0.5, 1.0, 21, 40};
  const GenerationTrace trace = srl_generate(lm, {}, srl, 4);
  CHECK(trace.tokens.size() == 40);
  CHECK(trace.steps.size() == 40);
  REQUIRE(trace.terminated_early);
  CHECK(trace.tokens[static_cast<std::size_t>(trace.effective_len - 1)] == 3);
  for (int t = trace.effective_len; t < 40; ++t) {
    CHECK(trace.tokens[static_cast<std::size_t>(t)] == 3);
    CHECK(trace.steps[static_cast<std::size_t>(t)].kl_realized == 0.0);
    CHECK(trace.steps[static_cast<std::size_t>(t)].dg_realized == 0.0);
  }
  CHECK(trace.effective_tokens().size() == static_cast<std::size_t>(trace.effective_len));

  // Same contract for the dual engine, with the exit lambda frozen into the
  // padding records.
  DualGaParams dual;
  dual.gamma = 0.5;
  dual.delta_target = 0.2;
  dual.eta = 0.5;
  dual.lambda_init = 1.0;
  dual.key = 21;
  dual.t_max = 40;
  const GenerationTrace dtrace = dualga_generate(lm, {}, dual, 4);
  if (dtrace.terminated_early) {
    for (int t = dtrace.effective_len; t < 40; ++t) {
      CHECK(dtrace.steps[static_cast<std::size_t>(t)].lambda ==
            dtrace.steps[static_cast<std::size_t>(40 - 1)].lambda);
      CHECK(dtrace.tokens[static_cast<std::size_t>(t)] == 3);
    }
  }
}

TEST_CASE("trace serialization round trip") {
  namespace fs = std::filesystem;
  Mix64Stream rng(110);
  const MarkovLM lm = testutil::random_markov_nonterm(rng, 10);
  DualGaParams params;
  params.gamma = 0.45;
  params.delta_target = 0.2;
  params.eta = 0.5;
  params.lambda_init = 1.0;
  params.key = 90210;
  params.t_max = 50;
  const GenerationTrace trace = dualga_generate(lm, {}, params, 6);

  const fs::path dir = fs::temp_directory_path() / "wmlab_trace_io";
  fs::create_directories(dir);
  const std::string path = (dir / "t.jsonl").string();
  write_trace(trace, path);
  const GenerationTrace loaded = read_trace(path);

  CHECK(loaded.engine == trace.engine);
  CHECK(loaded.vocab.size == trace.vocab.size);
  CHECK(loaded.gamma == trace.gamma);
  CHECK(loaded.key == trace.key);
  CHECK(loaded.tokens == trace.tokens);
  CHECK(loaded.effective_len == trace.effective_len);
  REQUIRE(loaded.steps.size() == trace.steps.size());
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    CHECK(loaded.steps[t].lambda == trace.steps[t].lambda);
    CHECK(loaded.steps[t].kl_realized == trace.steps[t].kl_realized);
    CHECK(loaded.steps[t].green == trace.steps[t].green);
  }
  CHECK(loaded.mean_kl() == doctest::Approx(trace.mean_kl()).epsilon(1e-15));
  fs::remove_all(dir);
}
