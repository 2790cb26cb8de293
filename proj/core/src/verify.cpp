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

#include "wmlab/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <sstream>

#include "wmlab/attack.hpp"
#include "wmlab/detect.hpp"
#include "wmlab/dual.hpp"
#include "wmlab/engines.hpp"
#include "wmlab/harness.hpp"
#include "wmlab/info.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/stats.hpp"

namespace wmlab {

namespace {

std::string fail(const std::string& msg) { return msg; }

std::string fail_at(const char* what, double got, double want, double tol) {
  std::ostringstream os;
  os << what << ": got " << got << ", want " << want << " within " << tol;
  return os.str();
}

Probs random_probs(Mix64Stream& rng, int n) {
  Probs p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : p) {
    v = -std::log(rng.next_unit());
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

MarkovLM random_markov(Mix64Stream& rng, int vocab_size, Token term = -1) {
  Vocabulary vocab;
  vocab.size = vocab_size;
  vocab.term_token = term < 0 ? vocab_size - 1 : term;
  std::vector<Probs> rows;
  rows.reserve(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) rows.push_back(random_probs(rng, vocab_size));
  return MarkovLM(vocab, random_probs(rng, vocab_size), std::move(rows));
}

// Calibration experiments need full-length sequences: zero out the
// terminator column and renormalize.
MarkovLM random_markov_nonterm(Mix64Stream& rng, int vocab_size) {
  Vocabulary vocab;
  vocab.size = vocab_size;
  vocab.term_token = vocab_size - 1;
  const auto strip = [&](Probs row) {
    row[static_cast<std::size_t>(vocab.term_token)] = 0.0;
    double sum = 0.0;
    for (double v : row) sum += v;
    for (double& v : row) v /= sum;
    return row;
  };
  std::vector<Probs> rows;
  rows.reserve(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) rows.push_back(strip(random_probs(rng, vocab_size)));
  return MarkovLM(vocab, strip(random_probs(rng, vocab_size)), std::move(rows));
}

// Explicit two-outcome construction: probability g on the green block,
// boosted by delta, compared against the closed forms.
std::pair<double, double> two_mass_oracle(double g, double delta) {
  const double zg = g * std::exp(delta);
  const double zr = 1.0 - g;
  const double z = zg + zr;
  const double qg = zg / z;
  const double qr = zr / z;
  const double dg = qg - g;
  double klv = 0.0;
  if (qg > 0.0) klv += qg * std::log(qg / g);
  if (qr > 0.0) klv += qr * std::log(qr / (1.0 - g));
  return {dg, klv};
}

using Body = std::function<std::string()>;

void run_one(std::vector<PropertyResult>& out, const std::string& name, const Body& body) {
  PropertyResult r;
  r.name = name;
  try {
    r.detail = body();
    r.pass = r.detail.empty();
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = e.what();
  }
  out.push_back(std::move(r));
}

}  // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  std::vector<PropertyResult> results;
  const std::uint64_t seed = options.seed;

  run_one(results, "lm.softmax-normalized-shift-invariant", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x01);
    for (int rep = 0; rep < 200; ++rep) {
      Logits l(8);
      for (double& v : l) v = 20.0 * (rng.next_unit() - 0.5);
      const Probs p = softmax(l);
      double sum = 0.0;
      for (double v : p) sum += v;
      if (std::abs(sum - 1.0) > 1e-12) return fail_at("softmax sum", sum, 1.0, 1e-12);
      Logits shifted(l);
      const double c = 100.0 * (rng.next_unit() - 0.5);
      for (double& v : shifted) v += c;
      const Probs ps = softmax(shifted);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (std::abs(p[k] - ps[k]) > 1e-12) return fail("softmax not shift invariant");
      }
    }
    return {};
  });

  run_one(results, "lm.partition-pure-function", [&]() -> std::string {
    const Vocabulary vocab{97, 0};
    Mix64Stream rng(seed ^ 0x02);
    for (int rep = 0; rep < 50; ++rep) {
      const std::uint64_t key = rng.next_u64();
      const Token prev = static_cast<Token>(rng.next_below(97));
      const double gamma = rng.next_unit();
      const GreenMask a = partition(key, prev, gamma, vocab);
      const GreenMask b = partition(key, prev, gamma, vocab);
      if (a.bits != b.bits) return fail("partition not deterministic");
      const auto want = static_cast<std::int32_t>(std::ceil(gamma * 97 - 1e-9));
      if (a.green_count != want && a.green_count != want + 1) {
        return fail("green count does not match the ceiling rule");
      }
    }
    return {};
  });

  run_one(results, "lm.partition-frequency-uniformity", [&]() -> std::string {
    const Vocabulary vocab{1000, 0};
    std::vector<int> green_freq(1000, 0);
    for (Token prev = 0; prev < 1000; ++prev) {
      const GreenMask mask = partition(seed, prev, 0.5, vocab);
      for (Token k = 0; k < 1000; ++k) {
        if (mask.green(k)) ++green_freq[static_cast<std::size_t>(k)];
      }
    }
    for (int k = 0; k < 1000; ++k) {
      const double f = green_freq[static_cast<std::size_t>(k)] / 1000.0;
      if (f < 0.40 || f > 0.60) return fail_at("per-index green frequency", f, 0.5, 0.10);
    }
    return {};
  });

  run_one(results, "lm.green-red-mass-complement", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x03);
    const Vocabulary vocab{32, 0};
    for (int rep = 0; rep < 100; ++rep) {
      const Probs p = random_probs(rng, 32);
      const GreenMask mask = partition(rng.next_u64(), 3, rng.next_unit(), vocab);
      const double total = green_mass(p, mask) + red_mass(p, mask);
      if (std::abs(total - 1.0) > 1e-12) return fail_at("green+red mass", total, 1.0, 1e-12);
    }
    return {};
  });

  run_one(results, "lm.sample-token-matches-distribution", [&]() -> std::string {
    const Probs p{0.1, 0.4, 0.25, 0.25};
    Mix64Stream rng(seed ^ 0x04);
    constexpr int kDraws = 1000000;
    std::array<int, 4> counts{};
    for (int i = 0; i < kDraws; ++i) {
      counts[static_cast<std::size_t>(sample_token(p, rng.next_unit()))]++;
    }
    for (std::size_t k = 0; k < 4; ++k) {
      const double freq = static_cast<double>(counts[k]) / kDraws;
      const double se = std::sqrt(p[k] * (1.0 - p[k]) / kDraws);
      if (std::abs(freq - p[k]) > 5.0 * se) {
        return fail_at("sampling frequency", freq, p[k], 5.0 * se);
      }
    }
    return {};
  });

  run_one(results, "engines.kl-zero-iff-no-boost", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x05);
    MarkovLM lm = random_markov(rng, 12);
    SrlParams zero{0.5, 0.0, seed, 40};
    const GenerationTrace t0 = srl_generate(lm, {}, zero, 7);
    for (int t = 0; t < t0.effective_len; ++t) {
      if (t0.steps[static_cast<std::size_t>(t)].kl_realized > 1e-12) {
        return fail("kl nonzero with zero boost");
      }
    }
    SrlParams boosted{0.5, 1.5, seed, 40};
    const GenerationTrace t1 = srl_generate(lm, {}, boosted, 7);
    for (int t = 0; t < t1.effective_len; ++t) {
      const auto& s = t1.steps[static_cast<std::size_t>(t)];
      if (s.kl_realized < 0.0) return fail("negative realized kl");
      if (s.g_mass > 1e-6 && s.g_mass < 1.0 - 1e-6 && s.kl_realized <= 1e-12) {
        return fail("kl zero despite an effective boost");
      }
    }
    return {};
  });

  run_one(results, "engines.srl-matches-closed-forms", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x06);
    MarkovLM lm = random_markov(rng, 16);
    SrlParams params{0.4, 1.2, seed ^ 0xAA, 60};
    const GenerationTrace trace = srl_generate(lm, {}, params, 11);
    for (int t = 0; t < trace.effective_len; ++t) {
      const auto& s = trace.steps[static_cast<std::size_t>(t)];
      if (std::abs(s.dg_realized - dg_closed_form(s.g_mass, params.delta)) > 1e-10) {
        return fail("realized DG deviates from the closed form");
      }
      if (std::abs(s.kl_realized - kl_closed_form(s.g_mass, params.delta)) > 1e-10) {
        return fail("realized KL deviates from the closed form");
      }
    }
    return {};
  });

  run_one(results, "engines.dualga-lambda-in-range", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x07);
    MarkovLM lm = random_markov(rng, 16);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.35;
    params.eta = 2.0;
    params.lambda_init = 1.0;
    params.lambda_cap = 2.5;  // tight cap to exercise the projection
    params.key = seed ^ 0xBB;
    params.t_max = 200;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 13);
    for (int t = 0; t < trace.effective_len; ++t) {
      const double l = trace.steps[static_cast<std::size_t>(t)].lambda;
      if (l < 0.0 || l > params.lambda_cap) return fail("lambda escaped [0, cap]");
    }
    return {};
  });

  run_one(results, "engines.dualga-update-identity", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x08);
    MarkovLM lm = random_markov(rng, 16);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.25;
    params.eta = 0.5;
    params.lambda_init = 1.0;
    params.key = seed ^ 0xCC;
    params.t_max = 80;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 17);
    for (int t = 0; t + 1 < trace.effective_len; ++t) {
      const auto& cur = trace.steps[static_cast<std::size_t>(t)];
      const auto& nxt = trace.steps[static_cast<std::size_t>(t + 1)];
      const double want = std::clamp(
          cur.lambda + params.eta * (params.delta_target - dg_closed_form(cur.g_mass, cur.lambda)),
          0.0, params.lambda_cap);
      if (std::abs(nxt.lambda - want) > 1e-15) {
        return fail("dual update does not match eta * (target - DG)");
      }
    }
    return {};
  });

  run_one(results, "engines.ems-deterministic", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x09);
    MarkovLM lm = random_markov(rng, 12);
    EmsParams params{1.0, seed ^ 0xDD, 50};
    const GenerationTrace a = ems_generate(lm, {}, params);
    const GenerationTrace b = ems_generate(lm, {}, params);
    if (a.tokens != b.tokens) return fail("ems generation not deterministic");
    return {};
  });

  run_one(results, "engines.terminator-padding", [&]() -> std::string {
    // Row 0 almost surely emits the terminator.
    Vocabulary vocab{4, 3};
    std::vector<Probs> rows(4, Probs{0.05, 0.05, 0.05, 0.85});
    MarkovLM lm(vocab, Probs{0.25, 0.25, 0.25, 0.25}, std::move(rows));
    SrlParams params{0.5, 0.5, seed, 64};
    const GenerationTrace trace = srl_generate(lm, {}, params, 3);
    if (static_cast<int>(trace.tokens.size()) != params.t_max) {
      return fail("trace not padded to t_max");
    }
    if (!trace.terminated_early) return {};  // terminator never sampled; nothing to check
    for (int t = trace.effective_len; t < params.t_max; ++t) {
      if (trace.tokens[static_cast<std::size_t>(t)] != vocab.term_token) {
        return fail("padding does not repeat the terminator");
      }
      if (trace.steps[static_cast<std::size_t>(t)].kl_realized != 0.0) {
        return fail("padding steps must carry zero divergence");
      }
    }
    if (trace.tokens[static_cast<std::size_t>(trace.effective_len - 1)] != vocab.term_token) {
      return fail("effective region should end at the first terminator");
    }
    return {};
  });

  run_one(results, "engines.srl-zero-delta-matches-plain", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x0A);
    MarkovLM lm = random_markov(rng, 12);
    SrlParams srl{0.5, 0.0, seed ^ 0xEE, 60};
    PlainParams plain{0.5, seed ^ 0xEE, 99, 60};
    const GenerationTrace a = srl_generate(lm, {}, srl, 99);
    const GenerationTrace b = plain_generate(lm, {}, plain);
    if (a.tokens != b.tokens) return fail("zero boost does not reproduce plain sampling");
    return {};
  });

  run_one(results, "dual.closed-forms-match-oracle", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x0B);
    for (int rep = 0; rep < 1000; ++rep) {
      const double g = 0.999998 * rng.next_unit() + 1e-6;
      const double delta = 8.0 * rng.next_unit();
      const auto [dg_want, kl_want] = two_mass_oracle(g, delta);
      const double dg_got = dg_closed_form(g, delta) + options.dg_reference_perturbation;
      if (std::abs(dg_got - dg_want) > 1e-10) {
        return fail_at("dg closed form", dg_got, dg_want, 1e-10);
      }
      if (std::abs(kl_closed_form(g, delta) - kl_want) > 1e-10) {
        return fail_at("kl closed form", kl_closed_form(g, delta), kl_want, 1e-10);
      }
    }
    return {};
  });

  run_one(results, "dual.dual-function-concave", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x0C);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> stream(20);
      for (double& g : stream) g = rng.next_unit();
      const double delta = 0.2 * rng.next_unit();
      const double lo = 8.0 * rng.next_unit();
      const double hi = lo + 8.0 * rng.next_unit();
      const double mid = 0.5 * (lo + hi);
      const double g_mid = dual_function(stream, mid, delta);
      const double chord =
          0.5 * (dual_function(stream, lo, delta) + dual_function(stream, hi, delta));
      if (g_mid < chord - 1e-12) return fail("dual function not concave on a triple");
    }
    return {};
  });

  run_one(results, "dual.strong-duality", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x0D);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> stream(50);
      double red = 0.0;
      for (double& g : stream) {
        g = 0.9 * rng.next_unit() + 0.05;
        red += 1.0 - g;
      }
      red /= stream.size();
      const double delta = 0.5 * red;
      const OneStepSolution sol = offline_opt(stream, delta);
      if (std::abs(sol.residual) > 1e-10) {
        return fail_at("binding constraint residual", sol.residual, 0.0, 1e-10);
      }
      // Coarse-to-fine grid sup of the dual must match the primal optimum.
      double best = 0.0;
      double best_l = 0.0;
      for (int i = 0; i <= 20000; ++i) {
        const double l = 20.0 * i / 20000.0;
        const double v = dual_function(stream, l, delta);
        if (v > best) {
          best = v;
          best_l = l;
        }
      }
      for (int i = -1000; i <= 1000; ++i) {
        const double l = best_l + 1e-3 * i / 1000.0;
        if (l < 0.0) continue;
        best = std::max(best, dual_function(stream, l, delta));
      }
      if (std::abs(best - sol.kl_star) > 1e-6) {
        return fail_at("dual supremum vs primal optimum", best, sol.kl_star, 1e-6);
      }
    }
    return {};
  });

  run_one(results, "dual.monotone-in-delta", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x0E);
    for (int rep = 0; rep < 50; ++rep) {
      const double g = 0.98 * rng.next_unit() + 0.01;
      double prev_dg = -1.0;
      double prev_kl = -1.0;
      for (int i = 0; i <= 100; ++i) {
        const double delta = 8.0 * i / 100.0;
        const double dg = dg_closed_form(g, delta);
        const double klv = kl_closed_form(g, delta);
        if (dg <= prev_dg) return fail("DG not strictly increasing in delta");
        if (klv < prev_kl - 1e-15) return fail("KL decreasing in delta");
        prev_dg = dg;
        prev_kl = klv;
      }
    }
    return {};
  });

  run_one(results, "dual.ce-gamma-first-order", [&]() -> std::string {
    for (const double delta : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const CeGammaSolution sol = ce_gamma_solve(delta);
      if (std::abs(sol.residual) > 1e-10) {
        return fail_at("FOC residual", sol.residual, 0.0, 1e-10);
      }
      for (int i = 1; i < 1000; ++i) {
        const double gamma = (1.0 - delta) * i / 1000.0;
        if (gamma <= 0.0 || gamma >= 1.0 - delta) continue;
        if (ce_kl(delta, sol.gamma_star) > ce_kl(delta, gamma) + 1e-12) {
          return fail("grid point beats the certainty-equivalent optimum");
        }
      }
    }
    return {};
  });

  run_one(results, "dual.nonstationarity-basics", [&]() -> std::string {
    const std::vector<double> constant(10, 0.4);
    const Nonstationarity w0 = nonstationarity(constant, 8.0);
    if (std::abs(w0.w1) > 1e-12 || std::abs(w0.w2) > 1e-12) {
      return fail("constant stream must have zero W");
    }
    const std::vector<double> ab{0.3, 0.7, 0.5, 0.2};
    const std::vector<double> ba{0.2, 0.5, 0.7, 0.3};
    const Nonstationarity wa = nonstationarity(ab, 8.0);
    const Nonstationarity wb = nonstationarity(ba, 8.0);
    if (std::abs(wa.w1 - wb.w1) > 1e-12 || std::abs(wa.w2 - wb.w2) > 1e-12) {
      return fail("W not permutation invariant");
    }
    if (wa.w1 <= 0.0 || wa.w2 <= 0.0) return fail("heterogeneous stream must have positive W");
    return {};
  });

  run_one(results, "detect.binomial-superuniform", [&]() -> std::string {
    // The vocabulary must dwarf T^2: repeated (prev, token) pairs share a
    // flag under any fixed key and would overdisperse the green count.
    Mix64Stream rng(seed ^ 0x0F);
    MarkovLM lm = random_markov_nonterm(rng, 128);
    constexpr int kSequences = 5000;
    std::vector<double> pvals(kSequences);
    for (int i = 0; i < kSequences; ++i) {
      PlainParams params{0.5, mix64(seed ^ static_cast<std::uint64_t>(i)),
                         mix64(0x5151 ^ static_cast<std::uint64_t>(i)), 100};
      const GenerationTrace trace = plain_generate(lm, {}, params);
      const auto tokens = trace.effective_tokens();
      const auto [count, n] = count_green(tokens, params.key, 0.5, lm.vocabulary());
      pvals[static_cast<std::size_t>(i)] = binom_p_value(count, n, 0.5);
    }
    for (const double alpha : {0.05, 0.01, 0.001}) {
      int hits = 0;
      for (const double p : pvals) {
        if (p <= alpha) ++hits;
      }
      const double frac = static_cast<double>(hits) / kSequences;
      if (frac > alpha + 3.0 * std::sqrt(alpha / kSequences)) {
        return fail_at("null rejection rate", frac, alpha, 3.0 * std::sqrt(alpha / kSequences));
      }
    }
    return {};
  });

  run_one(results, "detect.binomial-monotone-z-linear", [&]() -> std::string {
    double prev = 2.0;
    for (int count = 0; count <= 100; ++count) {
      const double p = binom_p_value(count, 100, 0.5);
      if (p > prev) return fail("binomial p-value increased in count");
      if (prev < 1.0 - 1e-12 && p >= prev) {
        return fail("binomial p-value not strictly decreasing in count");
      }
      prev = p;
    }
    const double z1 = z_score(60, 100, 0.5);
    const double z2 = z_score(61, 100, 0.5);
    const double z3 = z_score(62, 100, 0.5);
    if (std::abs((z3 - z2) - (z2 - z1)) > 1e-12) return fail("z-score not linear in count");
    return {};
  });

  run_one(results, "detect.generator-agreement", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x10);
    MarkovLM lm = random_markov(rng, 16);
    DualGaParams params;
    params.gamma = 0.5;
    params.delta_target = 0.3;
    params.eta = 0.5;
    params.lambda_init = 1.4;
    params.key = seed ^ 0x77;
    params.t_max = 120;
    const GenerationTrace trace = dualga_generate(lm, {}, params, 23);
    const auto tokens = trace.effective_tokens();
    const auto [count, n] = count_green(tokens, params.key, params.gamma, lm.vocabulary());
    int recorded = 0;
    for (int t = 1; t < trace.effective_len; ++t) {
      recorded += trace.steps[static_cast<std::size_t>(t)].green ? 1 : 0;
    }
    if (count != recorded || n != trace.effective_len - 1) {
      return fail("detector recount disagrees with the recorded flags");
    }
    return {};
  });

  run_one(results, "detect.bound-arithmetic", [&]() -> std::string {
    if (std::abs(alpha_bound(0.5, 4.0) - std::exp(-8.0)) > 1e-15) {
      return fail("alpha bound arithmetic");
    }
    if (alpha_bound(0.5, 0.0) != 1.0) return fail("alpha bound at z0=0 must be 1");
    if (beta_bound(0.0, 100, 0.5, 1.0) != 1.0) return fail("beta bound must be vacuous at target 0");
    const double b = 0.3 * std::sqrt(199.0) - 0.5 * 4.292;
    if (std::abs(beta_bound(0.3, 200, 0.5, 4.292) - std::exp(-2.0 * b * b)) > 1e-15) {
      return fail("beta bound arithmetic");
    }
    if (std::abs(adjusted_delta(AttackKind::deletion, 0.3, 0.5, 0.2, 200) - 0.25) > 1e-15) {
      return fail("deletion adjustment arithmetic");
    }
    if (std::abs(adjusted_delta(AttackKind::insertion, 0.3, 0.5, 0.0, 100) - 0.29) > 1e-15) {
      return fail("insertion adjustment arithmetic");
    }
    return {};
  });

  run_one(results, "attacks.deterministic-and-lengths", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x11);
    const Vocabulary vocab{32, 0};
    std::vector<Token> tokens(100);
    for (Token& t : tokens) t = static_cast<Token>(rng.next_below(32));
    for (const AttackKind kind :
         {AttackKind::deletion, AttackKind::insertion, AttackKind::substitution}) {
      for (const AttackMode mode : {AttackMode::random, AttackMode::worst_case}) {
        const AttackSpec spec{kind, 0.23, mode, seed ^ 0x99};
        const auto a = apply_attack(tokens, spec, seed, 0.5, vocab);
        const auto b = apply_attack(tokens, spec, seed, 0.5, vocab);
        if (a != b) return fail("attack not deterministic under a fixed seed");
        const std::size_t m = 23;
        const std::size_t want = kind == AttackKind::deletion   ? 100 - m
                                 : kind == AttackKind::insertion ? 100 + m
                                                                 : 100;
        if (a.size() != want) return fail("attacked length violates the contract");
      }
    }
    return {};
  });

  run_one(results, "attacks.worst-case-beats-random", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x12);
    MarkovLM lm = random_markov_nonterm(rng, 16);
    double worst_sum = 0.0;
    double random_sum = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      SrlParams params{0.5, 2.0, mix64(seed ^ static_cast<std::uint64_t>(rep)), 120};
      const GenerationTrace trace = srl_generate(lm, {}, params, rep + 1);
      const auto tokens = trace.effective_tokens();
      for (const AttackMode mode : {AttackMode::random, AttackMode::worst_case}) {
        const AttackSpec spec{AttackKind::substitution, 0.2, mode,
                              mix64(0x1234 ^ static_cast<std::uint64_t>(rep))};
        const auto attacked = apply_attack(tokens, spec, params.key, 0.5, lm.vocabulary());
        const auto [count, n] =
            count_green(attacked, params.key, 0.5, lm.vocabulary());
        (mode == AttackMode::worst_case ? worst_sum : random_sum) += count;
      }
    }
    if (worst_sum >= random_sum) {
      return fail("worst-case substitution left at least as many greens as random");
    }
    return {};
  });

  run_one(results, "info.kl-basics", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x13);
    for (int rep = 0; rep < 100; ++rep) {
      const Probs p = random_probs(rng, 6);
      const Probs q = random_probs(rng, 6);
      const KlValue same = kl(std::span<const double>(p), std::span<const double>(p));
      if (same.infinite || std::abs(same.value) > 1e-12) return fail("kl(p, p) must be 0");
      const KlValue v = kl(std::span<const double>(q), std::span<const double>(p));
      if (v.infinite || v.value < 0.0) return fail("kl must be finite and nonnegative here");
    }
    const std::vector<double> q{0.5, 0.5};
    const std::vector<double> p{1.0, 0.0};
    if (!kl(std::span<const double>(q), std::span<const double>(p)).infinite) {
      return fail("absolute continuity violation must flag infinity");
    }
    return {};
  });

  run_one(results, "info.chain-rule", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x14);
    for (int rep = 0; rep < 5; ++rep) {
      MarkovLM lm = random_markov(rng, 3, 2);
      const JointModel p = joint_from_lm(lm, {}, 3);
      DualGaParams params;
      params.gamma = 0.4;
      params.delta_target = 0.2;
      params.eta = 0.5;
      params.lambda_init = 0.8;
      params.key = rng.next_u64();
      params.t_max = 3;
      const JointModel q = joint_dualga(lm, {}, 3, params);
      const ChainRuleResult r = chain_rule_check(q, p);
      if (std::abs(r.joint_kl - r.summed_conditional_kl) > 1e-12) {
        return fail_at("chain rule", r.joint_kl, r.summed_conditional_kl, 1e-12);
      }
    }
    return {};
  });

  run_one(results, "info.lecam-bretagnolle-huber", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x15);
    for (int rep = 0; rep < 200; ++rep) {
      FiniteDistribution p;
      FiniteDistribution q;
      for (Token i = 0; i < 8; ++i) {
        p.support.push_back({i});
        q.support.push_back({i});
      }
      p.probs = random_probs(rng, 8);
      if (rep % 2 == 0) {
        q.probs = random_probs(rng, 8);
      } else {
        // Small perturbations probe the KL -> 0 regime.
        q.probs = p.probs;
        double total = 0.0;
        for (double& v : q.probs) {
          v *= 1.0 + 2e-4 * (rng.next_unit() - 0.5);
          total += v;
        }
        for (double& v : q.probs) v /= total;
      }
      const double floor = le_cam_errors(q, p);
      const KlValue d = kl(q, p);
      if (d.infinite) continue;
      if (floor < 1.0 - std::sqrt(1.0 - std::exp(-d.value)) - 1e-12) {
        return fail("error floor undercuts the KL bound");
      }
      if (d.value < 1e-6 && floor <= 0.998) {
        return fail("tiny KL must leave the detector near random guessing");
      }
    }
    return {};
  });

  run_one(results, "info.jensen-on-kl", [&]() -> std::string {
    Mix64Stream rng(seed ^ 0x16);
    for (int rep = 0; rep < 100; ++rep) {
      const Probs p = random_probs(rng, 6);
      Probs avg(6, 0.0);
      double mean_kl = 0.0;
      constexpr int kFamily = 8;
      for (int j = 0; j < kFamily; ++j) {
        const Probs qj = random_probs(rng, 6);
        for (std::size_t k = 0; k < 6; ++k) avg[k] += qj[k] / kFamily;
        mean_kl += kl(std::span<const double>(qj), std::span<const double>(p)).value / kFamily;
      }
      const double lhs = kl(std::span<const double>(avg), std::span<const double>(p)).value;
      if (lhs > mean_kl + 1e-12) return fail("Jensen inequality violated");
    }
    return {};
  });

  run_one(results, "info.ems-marginal-vs-entropy", [&]() -> std::string {
    Vocabulary vocab{4, 3};
    std::vector<Probs> rows(4, Probs{0.4, 0.3, 0.2, 0.1});
    MarkovLM lm(vocab, Probs{0.4, 0.3, 0.2, 0.1}, std::move(rows));
    constexpr int kKeys = 100000;
    const EmsMarginalReport report = ems_marginal_and_kl(lm, {}, kKeys, seed ^ 0x17);
    if (report.max_marginal_gap >= 5.0 * std::sqrt(0.25 / kKeys)) {
      return fail_at("marginal gap", report.max_marginal_gap, 0.0,
                     5.0 * std::sqrt(0.25 / kKeys));
    }
    if (std::abs(report.mean_kl - report.entropy) > 0.01 * report.entropy) {
      return fail_at("mean realized kl vs entropy", report.mean_kl, report.entropy,
                     0.01 * report.entropy);
    }
    return {};
  });

  run_one(results, "harness.monitor-basics", [&]() -> std::string {
    const std::vector<double> flat(100, 1.0);
    if (!monitor_lambda(flat, 12.0, 15).empty()) return fail("constant lambda must not alert");
    std::vector<double> rising(40);
    for (std::size_t i = 0; i < rising.size(); ++i) rising[i] = 0.1 * static_cast<double>(i);
    const auto run_alerts = monitor_lambda(rising, 1e9, 15);
    if (run_alerts.empty()) return fail("monotone run missed");
    std::vector<double> spike(50, 1.0);
    spike[20] = 13.0;
    const auto spike_alerts = monitor_lambda(spike, 12.0, 1000);
    if (spike_alerts.size() != 1 || spike_alerts[0].start_step != 21) {
      return fail("threshold excursion missed or misplaced");
    }
    return {};
  });

  return results;
}

}  // namespace wmlab
