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
#include <fstream>
#include <vector>

#include "test_util.hpp"
#include "wmlab/dual.hpp"
#include "wmlab/stats.hpp"

using namespace wmlab;

namespace {
constexpr double kLn3 = 1.0986122886681098;
}

TEST_CASE("closed forms at anchor points") {
  CHECK(dg_closed_form(0.5, 0.0) == 0.0);
  CHECK(dg_closed_form(0.0, 3.0) == 0.0);
  CHECK(dg_closed_form(1.0, 3.0) == 0.0);
  // Frozen from the two-mass brute-force oracle.
  CHECK(dg_closed_form(0.5, 1.0) == doctest::Approx(0.2310585786300049).epsilon(1e-12));

  CHECK(kl_closed_form(0.5, 0.0) == 0.0);
  CHECK(std::abs(kl_closed_form(1.0, 4.0)) < 1e-12);
  CHECK(kl_closed_form(0.5, 1.0) == doctest::Approx(0.1109440716717274).epsilon(1e-12));
}

TEST_CASE("closed forms match the explicit two-mass construction") {
  Mix64Stream rng(2024);
  for (int rep = 0; rep < 1000; ++rep) {
    const double g = 0.999998 * rng.next_unit() + 1e-6;
    const double delta = 8.0 * rng.next_unit();
    const auto [dg_want, kl_want] = testutil::two_mass_oracle(g, delta);
    CHECK(dg_closed_form(g, delta) == doctest::Approx(dg_want).epsilon(1e-10));
    CHECK(kl_closed_form(g, delta) == doctest::Approx(kl_want).epsilon(1e-10));
  }
}

TEST_CASE("closed forms are monotone in the boost") {
  Mix64Stream rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const double g = 0.98 * rng.next_unit() + 0.01;
    double prev_dg = -1.0;
    double prev_kl = -1e-18;
    for (int i = 0; i <= 80; ++i) {
      const double delta = 0.1 * i;
      const double dg = dg_closed_form(g, delta);
      const double klv = kl_closed_form(g, delta);
      CHECK(dg > prev_dg);
      CHECK(klv >= prev_kl - 1e-15);
      prev_dg = dg;
      prev_kl = klv;
    }
  }
}

TEST_CASE("dual function") {
  SUBCASE("zero at lambda 0") {
    const std::vector<double> stream{0.2, 0.8, 0.5};
    CHECK(dual_function(stream, 0.0, 0.3) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("single-step value at the optimum matches the optimal divergence") {
    const std::vector<double> stream{0.5};
    CHECK(dual_function(stream, kLn3, 0.25) ==
          doctest::Approx(0.13081203594113696).epsilon(1e-12));
  }
  SUBCASE("concavity on random triples") {
    Mix64Stream rng(11);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> stream(30);
      for (double& g : stream) g = rng.next_unit();
      const double target = 0.3 * rng.next_unit();
      const double lo = 6.0 * rng.next_unit();
      const double hi = lo + 6.0 * rng.next_unit();
      const double mid = 0.5 * (lo + hi);
      CHECK(dual_function(stream, mid, target) >=
            0.5 * (dual_function(stream, lo, target) + dual_function(stream, hi, target)) -
                1e-12);
    }
  }
}

TEST_CASE("one-step optimum") {
  SUBCASE("zero target is free") {
    const OneStepSolution sol = one_step_optimum(0.4, 0.0);
    CHECK(sol.lambda_star == 0.0);
    CHECK(sol.kl_star == 0.0);
  }
  SUBCASE("hand-evaluated optimum at g = 0.5, target 0.25") {
    const OneStepSolution sol = one_step_optimum(0.5, 0.25);
    CHECK(sol.lambda_star == doctest::Approx(kLn3).epsilon(1e-12));
    CHECK(sol.kl_star == doctest::Approx(0.13081203594113696).epsilon(1e-12));
  }
  SUBCASE("optimal divergence agrees with the closed form at the optimum") {
    Mix64Stream rng(13);
    for (int rep = 0; rep < 200; ++rep) {
      const double g = 0.9 * rng.next_unit() + 0.05;
      const double target = (1.0 - g) * 0.95 * rng.next_unit();
      const OneStepSolution sol = one_step_optimum(g, target);
      CHECK(sol.kl_star ==
            doctest::Approx(kl_closed_form(g, sol.lambda_star)).epsilon(1e-12));
      CHECK(std::abs(sol.residual) < 1e-12);
    }
  }
  SUBCASE("boundary target is infeasible") {
    CHECK_THROWS_AS(one_step_optimum(0.4, 0.6), InfeasibleError);
    CHECK_THROWS_AS(one_step_optimum(0.4, 0.7), InfeasibleError);
  }
}

TEST_CASE("offline optimum") {
  SUBCASE("constant stream reduces to the one-step solution") {
    const std::vector<double> stream(10, 0.5);
    const OneStepSolution a = offline_opt(stream, 0.25);
    const OneStepSolution b = one_step_optimum(0.5, 0.25);
    CHECK(a.lambda_star == doctest::Approx(b.lambda_star).epsilon(1e-10));
    CHECK(a.kl_star == doctest::Approx(b.kl_star).epsilon(1e-10));
  }
  SUBCASE("zero target") {
    const std::vector<double> stream{0.2, 0.6};
    const OneStepSolution sol = offline_opt(stream, 0.0);
    CHECK(sol.lambda_star == 0.0);
    CHECK(sol.kl_star == 0.0);
  }
  SUBCASE("two-point stream against the frozen bisection oracle") {
    const std::vector<double> stream{0.3, 0.7};
    const OneStepSolution sol = offline_opt(stream, 0.2);
    CHECK(sol.lambda_star == doctest::Approx(0.9947851369079975).epsilon(1e-9));
    CHECK(sol.kl_star == doctest::Approx(0.09727085937803565).epsilon(1e-10));
    const double mean_dg =
        0.5 * (dg_closed_form(0.3, sol.lambda_star) + dg_closed_form(0.7, sol.lambda_star));
    CHECK(std::abs(mean_dg - 0.2) < 1e-10);
  }
  SUBCASE("infeasible stream") {
    const std::vector<double> stream{0.9, 0.95};
    CHECK_THROWS_AS(offline_opt(stream, 0.2), InfeasibleError);
  }
}

TEST_CASE("certainty-equivalent gamma") {
  SUBCASE("binding boost at gamma 0.5, target 0.25 is log 3") {
    CHECK(ce_delta_star(0.25, 0.5) == doctest::Approx(kLn3).epsilon(1e-12));
  }
  SUBCASE("first-order condition holds at the solution") {
    for (const double target : {0.1, 0.2, 0.25, 0.3, 0.4, 0.5}) {
      const CeGammaSolution sol = ce_gamma_solve(target);
      CHECK(std::abs(sol.residual) < 1e-10);
      CHECK(sol.gamma_star > 0.0);
      CHECK(sol.gamma_star < 1.0 - target);
      CHECK(sol.kl_at_star == doctest::Approx(ce_kl(target, sol.gamma_star)).epsilon(1e-12));
    }
  }
  SUBCASE("frozen solver anchor") {
    CHECK(ce_gamma_solve(0.25).gamma_star == doctest::Approx(0.415706057237909).epsilon(1e-8));
    CHECK(ce_gamma_solve(0.5).gamma_star == doctest::Approx(0.324619762202819).epsilon(1e-8));
  }
  SUBCASE("no gamma on a fine grid does better") {
    const double target = 0.3;
    const CeGammaSolution sol = ce_gamma_solve(target);
    for (int i = 1; i < 1000; ++i) {
      const double gamma = (1.0 - target) * i / 1000.0;
      if (gamma >= 1.0 - target) continue;
      CHECK(sol.kl_at_star <= ce_kl(target, gamma) + 1e-12);
    }
  }
  SUBCASE("rejects targets outside (0, 1)") {
    CHECK_THROWS(ce_gamma_solve(1.0));
    CHECK_THROWS(ce_gamma_solve(0.0));
  }
}

TEST_CASE("dual dynamics") {
  SUBCASE("constant stream converges to the binding boost") {
    const std::vector<double> stream(10000, 0.5);
    const DualTrace trace = simulate_dual_dynamics(stream, 0.25, 0.01, 0.0, 50.0);
    CHECK(std::abs(trace.lambdas.back() - kLn3) < 0.05);
    CHECK(trace.lambdas.size() == stream.size() + 1);
  }
  SUBCASE("frozen step size freezes the iterate") {
    const std::vector<double> stream(100, 0.3);
    const DualTrace trace = simulate_dual_dynamics(stream, 0.2, 0.0, 1.5, 50.0);
    for (double l : trace.lambdas) CHECK(l == 1.5);
  }
  SUBCASE("zero target with zero start stays at zero") {
    const std::vector<double> stream(100, 0.5);
    const DualTrace trace = simulate_dual_dynamics(stream, 0.0, 0.5, 0.0, 50.0);
    for (double l : trace.lambdas) CHECK(l == 0.0);
    CHECK(trace.mean_kl == 0.0);
  }
  SUBCASE("iterates respect the cap") {
    const std::vector<double> stream(500, 0.999);
    const DualTrace trace = simulate_dual_dynamics(stream, 0.3, 5.0, 0.0, 2.0);
    for (double l : trace.lambdas) {
      CHECK(l >= 0.0);
      CHECK(l <= 2.0);
    }
  }
}

TEST_CASE("nonstationarity measures") {
  SUBCASE("constant stream has zero deviation") {
    const std::vector<double> stream(25, 0.4);
    const Nonstationarity w = nonstationarity(stream, 8.0);
    CHECK(std::abs(w.w1) < 1e-12);
    CHECK(std::abs(w.w2) < 1e-12);
  }
  SUBCASE("two-point stream against a direct grid evaluation") {
    const std::vector<double> stream{0.3, 0.7};
    const Nonstationarity w = nonstationarity(stream, 8.0, 512);
    // Independent evaluation of the same sup-norm definition.
    double want_w1 = 0.0;
    double want_w2 = 0.0;
    for (const double g : stream) {
      double sup_kl = 0.0;
      double sup_dg = 0.0;
      for (int j = 0; j < 512; ++j) {
        const double lambda = 8.0 * j / 511.0;
        const double mean_kl =
            0.5 * (kl_closed_form(0.3, lambda) + kl_closed_form(0.7, lambda));
        const double mean_dg =
            0.5 * (dg_closed_form(0.3, lambda) + dg_closed_form(0.7, lambda));
        sup_kl = std::max(sup_kl, std::abs(kl_closed_form(g, lambda) - mean_kl));
        sup_dg = std::max(sup_dg, std::abs(dg_closed_form(g, lambda) - mean_dg));
      }
      want_w1 += sup_kl;
      want_w2 += sup_dg;
    }
    CHECK(w.w1 == doctest::Approx(want_w1).epsilon(1e-12));
    CHECK(w.w2 == doctest::Approx(want_w2).epsilon(1e-12));
    CHECK(w.w1 > 0.0);
    CHECK(w.w2 > 0.0);
  }
  SUBCASE("permutation invariance") {
    const std::vector<double> a{0.2, 0.5, 0.7, 0.35};
    const std::vector<double> b{0.7, 0.35, 0.2, 0.5};
    const Nonstationarity wa = nonstationarity(a, 6.0);
    const Nonstationarity wb = nonstationarity(b, 6.0);
    CHECK(wa.w1 == doctest::Approx(wb.w1).epsilon(1e-12));
    CHECK(wa.w2 == doctest::Approx(wb.w2).epsilon(1e-12));
  }
}

TEST_CASE("green mass stream file") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "wmlab_stream_io";
  fs::create_directories(dir);
  const std::string path = (dir / "g.txt").string();
  {
    std::ofstream out(path);
    out << "0.25\n0.5\n0.75\n";
  }
  const auto stream = load_green_mass_stream(path);
  REQUIRE(stream.size() == 3);
  CHECK(stream[1] == 0.5);
  {
    std::ofstream out(path);
    out << "1.5\n";
  }
  CHECK_THROWS(load_green_mass_stream(path));
  fs::remove_all(dir);
}

TEST_CASE("special functions") {
  SUBCASE("exact binomial tails") {
    CHECK(binom_tail_geq(0, 10, 0.5) == 1.0);
    CHECK(binom_tail_geq(11, 10, 0.5) == 0.0);
    CHECK(binom_tail_geq(10, 10, 0.5) == doctest::Approx(0.0009765625).epsilon(1e-13));
    // Frozen from an exact big-rational summation.
    CHECK(binom_tail_geq(60, 100, 0.5) ==
          doctest::Approx(0.028443966820490395).epsilon(1e-12));
  }
  SUBCASE("regularized upper incomplete gamma") {
    CHECK(upper_gamma_q(1.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(upper_gamma_q(2.0, 1.0) == doctest::Approx(0.73575888234288464).epsilon(1e-12));
    CHECK(upper_gamma_q(11.5, 11.0) == doctest::Approx(0.52025178040079561).epsilon(1e-12));
    CHECK(upper_gamma_q(200.0, 200.0) == doctest::Approx(0.49059658199276367).epsilon(1e-12));
    CHECK(upper_gamma_q(200.0, 250.0) ==
          doctest::Approx(4.8221275959343374e-4).epsilon(1e-11));
    CHECK(upper_gamma_q(3.0, 12.0) == doctest::Approx(5.2225805003289783e-4).epsilon(1e-11));
    CHECK(upper_gamma_q(5.0, 0.0) == 1.0);
  }
  SUBCASE("normal cdf") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(-1.9599639845400545) == doctest::Approx(0.025).epsilon(1e-9));
    CHECK(normal_cdf(3.0) + normal_cdf(-3.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("ks statistic") {
    std::vector<double> ramp(1000);
    for (std::size_t i = 0; i < ramp.size(); ++i) {
      ramp[i] = (static_cast<double>(i) + 0.5) / 1000.0;
    }
    CHECK(ks_statistic_uniform(ramp) == doctest::Approx(0.0005).epsilon(1e-9));
    CHECK(ks_statistic_uniform(std::vector<double>(100, 0.5)) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
}
