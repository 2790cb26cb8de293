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
//
// Closed-form green-boost trade-off curves, the Lagrangian dual, one-step
// and offline optimal boosts, the certainty-equivalent gamma solver, and
// pure dual-ascent dynamics.

#ifndef WMLAB_DUAL_HPP_
#define WMLAB_DUAL_HPP_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmlab {

// Thrown when a requested average green-probability gain exceeds what the
// red mass can supply.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Gain in green probability when every green logit is boosted by delta and
// the original green mass is g:  g(1-g)(e^d - 1) / (g e^d - g + 1).
double dg_closed_form(double g, double delta);

// KL divergence of the boosted distribution from the original:
// g d e^d / (g e^d - g + 1) - log(g e^d - g + 1).
double kl_closed_form(double g, double delta);

// Lagrangian dual value (1/T) sum_t [(g_t + target) l - log(g_t e^l - g_t + 1)].
// Concave in l with derivative target - (1/T) sum_t dg_closed_form(g_t, l).
double dual_function(std::span<const double> stream, double lambda,
                     double delta_target);

struct OneStepSolution {
  double lambda_star = 0.0;
  double kl_star = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// Closed-form optimum for a single green mass g and target in [0, 1-g).
OneStepSolution one_step_optimum(double g, double delta_target);

// Hindsight optimum for a realized stream: bisection on the binding
// constraint (1/T) sum_t dg(g_t, lambda) = target over lambda in [0, 700].
OneStepSolution offline_opt(std::span<const double> stream, double delta_target);

struct CeGammaSolution {
  double gamma_star = 0.0;
  double residual = 0.0;
  double kl_at_star = 0.0;
};

// Boost that makes the certainty-equivalent constraint bind at (target, gamma).
double ce_delta_star(double delta_target, double gamma);

// Certainty-equivalent KL as a function of gamma, with every per-step green
// mass replaced by gamma.
double ce_kl(double delta_target, double gamma);

// Green-list ratio minimizing ce_kl, from the first-order condition.
CeGammaSolution ce_gamma_solve(double delta_target);

struct DualTrace {
  std::vector<double> lambdas;  // length T + 1
  double mean_dg = 0.0;
  double mean_kl = 0.0;
};

// The dual-ascent recursion isolated from token sampling:
// lambda_{t+1} = clamp(lambda_t + eta (target - dg(g_t, lambda_t)), 0, cap).
DualTrace simulate_dual_dynamics(std::span<const double> stream,
                                 double delta_target, double eta,
                                 double lambda_init, double lambda_cap);

struct Nonstationarity {
  double w1 = 0.0;  // sum_t sup_lambda |kl_t - mean kl|
  double w2 = 0.0;  // sum_t sup_lambda |dg_t - mean dg|
};

// Sup norms taken over a uniform lambda grid on [0, lambda_max].
Nonstationarity nonstationarity(std::span<const double> stream,
                                double lambda_max, int grid_points = 512);

// One value per line, each in [0, 1].
std::vector<double> load_green_mass_stream(const std::string& path);

}  // namespace wmlab

#endif  // WMLAB_DUAL_HPP_
