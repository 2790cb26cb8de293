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

#include "wmlab/dual.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace wmlab {

namespace {

// e^lambda stays finite below this bound; beyond it the gain is within
// 1e-300 of its supremum anyway.
constexpr double kLambdaMax = 700.0;
constexpr double kResidualTol = 1e-12;
constexpr double kFeasSlack = 1e-9;

double mean_dg(std::span<const double> stream, double lambda) {
  double s = 0.0;
  for (double g : stream) s += dg_closed_form(g, lambda);
  return s / static_cast<double>(stream.size());
}

double mean_kl(std::span<const double> stream, double lambda) {
  double s = 0.0;
  for (double g : stream) s += kl_closed_form(g, lambda);
  return s / static_cast<double>(stream.size());
}

}  // namespace

double dg_closed_form(double g, double delta) {
  if (g <= 0.0 || g >= 1.0) return 0.0;
  const double em1 = std::expm1(delta);
  return g * (1.0 - g) * em1 / (g * em1 + 1.0);
}

double kl_closed_form(double g, double delta) {
  if (g <= 0.0) return 0.0;
  const double denom = g * std::expm1(delta) + 1.0;
  return g * delta * std::exp(delta) / denom - std::log(denom);
}

double dual_function(std::span<const double> stream, double lambda,
                     double delta_target) {
  if (stream.empty()) throw std::invalid_argument("empty stream");
  double s = 0.0;
  for (double g : stream) {
    s += (g + delta_target) * lambda - std::log(g * std::expm1(lambda) + 1.0);
  }
  return s / static_cast<double>(stream.size());
}

OneStepSolution one_step_optimum(double g, double delta_target) {
  if (g <= 0.0 || g >= 1.0) throw std::invalid_argument("green mass must be in (0, 1)");
  const double r = 1.0 - g;
  if (delta_target < 0.0 || delta_target >= r) {
    throw InfeasibleError("DG target exceeds red mass");
  }
  OneStepSolution sol;
  if (delta_target == 0.0) return sol;
  sol.lambda_star = std::log((delta_target + g) * r / ((r - delta_target) * g));
  sol.kl_star = (r - delta_target) * std::log((r - delta_target) / r) +
                (delta_target + g) * std::log((delta_target + g) / g);
  sol.residual = dg_closed_form(g, sol.lambda_star) - delta_target;
  return sol;
}

OneStepSolution offline_opt(std::span<const double> stream, double delta_target) {
  if (stream.empty()) throw std::invalid_argument("empty stream");
  if (delta_target < 0.0) throw std::invalid_argument("negative DG target");
  double red = 0.0;
  for (double g : stream) red += 1.0 - g;
  red /= static_cast<double>(stream.size());
  if (delta_target >= red - kFeasSlack) {
    throw InfeasibleError("DG target exceeds red mass");
  }
  OneStepSolution sol;
  if (delta_target == 0.0) return sol;

  double lo = 0.0;
  double hi = kLambdaMax;
  int iters = 0;
  double mid = 0.0;
  double resid = 0.0;
  for (; iters < 200; ++iters) {
    mid = 0.5 * (lo + hi);
    resid = mean_dg(stream, mid) - delta_target;
    if (std::abs(resid) < kResidualTol) break;
    if (resid < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  sol.lambda_star = mid;
  sol.kl_star = mean_kl(stream, mid);
  sol.residual = resid;
  sol.iterations = iters;
  return sol;
}

double ce_delta_star(double delta_target, double gamma) {
  return std::log1p(delta_target / gamma) +
         std::log1p(delta_target / (1.0 - gamma - delta_target));
}

double ce_kl(double delta_target, double gamma) {
  const double d = delta_target;
  return (d + gamma) * (std::log(gamma + d) - std::log(gamma)) +
         (1.0 - d - gamma) * (std::log(1.0 - gamma - d) - std::log(1.0 - gamma));
}

CeGammaSolution ce_gamma_solve(double delta_target) {
  if (delta_target <= 0.0 || delta_target >= 1.0) {
    throw std::invalid_argument("DG target must be in (0, 1)");
  }
  const double d = delta_target;
  // First-order condition of ce_kl in gamma; increasing because the second
  // derivative of ce_kl is positive on the open interval.
  const auto foc = [d](double g) {
    return -d / g - d / (1.0 - g) + std::log(g + d) - std::log(g) -
           std::log(1.0 - g - d) + std::log(1.0 - g);
  };
  double lo = 1e-9;
  double hi = 1.0 - d - 1e-9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (foc(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  CeGammaSolution sol;
  sol.gamma_star = 0.5 * (lo + hi);
  sol.residual = foc(sol.gamma_star);
  sol.kl_at_star = ce_kl(d, sol.gamma_star);
  return sol;
}

DualTrace simulate_dual_dynamics(std::span<const double> stream,
                                 double delta_target, double eta,
                                 double lambda_init, double lambda_cap) {
  if (lambda_cap <= 0.0) throw std::invalid_argument("lambda cap must be positive");
  DualTrace trace;
  trace.lambdas.reserve(stream.size() + 1);
  double lambda = std::clamp(lambda_init, 0.0, lambda_cap);
  trace.lambdas.push_back(lambda);
  double dg_sum = 0.0;
  double kl_sum = 0.0;
  for (double g : stream) {
    dg_sum += dg_closed_form(g, lambda);
    kl_sum += kl_closed_form(g, lambda);
    lambda += eta * (delta_target - dg_closed_form(g, lambda));
    lambda = std::clamp(lambda, 0.0, lambda_cap);
    trace.lambdas.push_back(lambda);
  }
  const auto t = static_cast<double>(stream.size());
  trace.mean_dg = dg_sum / t;
  trace.mean_kl = kl_sum / t;
  return trace;
}

Nonstationarity nonstationarity(std::span<const double> stream,
                                double lambda_max, int grid_points) {
  if (stream.empty() || grid_points < 2) {
    throw std::invalid_argument("need a stream and at least two grid points");
  }
  const auto t = stream.size();
  const auto n = static_cast<std::size_t>(grid_points);
  std::vector<double> mean_kl_grid(n, 0.0);
  std::vector<double> mean_dg_grid(n, 0.0);
  std::vector<double> lambdas(n);
  for (std::size_t j = 0; j < n; ++j) {
    lambdas[j] = lambda_max * static_cast<double>(j) / static_cast<double>(n - 1);
  }
  for (double g : stream) {
    for (std::size_t j = 0; j < n; ++j) {
      mean_kl_grid[j] += kl_closed_form(g, lambdas[j]);
      mean_dg_grid[j] += dg_closed_form(g, lambdas[j]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    mean_kl_grid[j] /= static_cast<double>(t);
    mean_dg_grid[j] /= static_cast<double>(t);
  }
  Nonstationarity w;
  for (double g : stream) {
    double sup_kl = 0.0;
    double sup_dg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sup_kl = std::max(sup_kl, std::abs(kl_closed_form(g, lambdas[j]) - mean_kl_grid[j]));
      sup_dg = std::max(sup_dg, std::abs(dg_closed_form(g, lambdas[j]) - mean_dg_grid[j]));
    }
    w.w1 += sup_kl;
    w.w2 += sup_dg;
  }
  return w;
}

std::vector<double> load_green_mass_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> stream;
  double v = 0.0;
  while (in >> v) {
    if (v < 0.0 || v > 1.0) throw std::runtime_error("green mass outside [0, 1] in " + path);
    stream.push_back(v);
  }
  if (stream.empty()) throw std::runtime_error("empty green mass stream: " + path);
  return stream;
}

}  // namespace wmlab
