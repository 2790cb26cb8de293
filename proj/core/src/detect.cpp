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

#include "wmlab/detect.hpp"

#include <cmath>
#include <stdexcept>

#include "wmlab/engines.hpp"
#include "wmlab/stats.hpp"

namespace wmlab {

std::string to_string(DetectMethod method) {
  switch (method) {
    case DetectMethod::green_z: return "green_z";
    case DetectMethod::green_binomial: return "green_binomial";
    case DetectMethod::ems_gamma: return "ems_gamma";
    case DetectMethod::autocov_normal: return "autocov_normal";
  }
  return "unknown";
}

DetectMethod detect_method_from_string(const std::string& name) {
  if (name == "green_z") return DetectMethod::green_z;
  if (name == "green_binomial") return DetectMethod::green_binomial;
  if (name == "ems_gamma") return DetectMethod::ems_gamma;
  if (name == "autocov_normal") return DetectMethod::autocov_normal;
  throw std::invalid_argument("unknown detection method: " + name);
}

std::pair<int, int> count_green(std::span<const Token> tokens, std::uint64_t key,
                                double gamma, const Vocabulary& vocab) {
  if (tokens.size() < 2) throw std::invalid_argument("need at least two tokens");
  int count = 0;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const GreenMask mask = partition(key, tokens[t - 1], gamma, vocab);
    if (mask.green(tokens[t])) ++count;
  }
  return {count, static_cast<int>(tokens.size()) - 1};
}

double z_score(int count, int n, double gamma) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma outside (0, 1)");
  return (count - gamma * n) / std::sqrt(n * gamma * (1.0 - gamma));
}

double binom_p_value(int count, int n, double gamma) {
  if (count < 0 || count > n) throw std::invalid_argument("count outside [0, n]");
  return binom_tail_geq(count, n, gamma);
}

DetectionReport detect_green_z(std::span<const Token> tokens, std::uint64_t key,
                               double gamma, const Vocabulary& vocab,
                               double threshold) {
  const auto [count, n] = count_green(tokens, key, gamma, vocab);
  DetectionReport report;
  report.method = DetectMethod::green_z;
  report.score = z_score(count, n, gamma);
  report.p_value = 1.0 - normal_cdf(report.score);
  report.n_effective = n;
  report.threshold = threshold;
  report.decision = report.p_value <= threshold;
  return report;
}

DetectionReport detect_green_binomial(std::span<const Token> tokens,
                                      std::uint64_t key, double gamma,
                                      const Vocabulary& vocab, double threshold) {
  const auto [count, n] = count_green(tokens, key, gamma, vocab);
  DetectionReport report;
  report.method = DetectMethod::green_binomial;
  report.score = z_score(count, n, gamma);
  report.p_value = binom_p_value(count, n, gamma);
  report.n_effective = n;
  report.threshold = threshold;
  report.decision = report.p_value <= threshold;
  return report;
}

DetectionReport ems_p_value(std::span<const Token> tokens, std::uint64_t key,
                            const Vocabulary& vocab, double threshold) {
  if (tokens.empty()) throw std::invalid_argument("need at least one token");
  double s = 0.0;
  Token prev = initial_token(key, vocab);
  for (const Token y : tokens) {
    const double r = ems_r_value(key, prev, y);
    s += -std::log1p(-r);
    prev = y;
  }
  const auto t = static_cast<double>(tokens.size());
  DetectionReport report;
  report.method = DetectMethod::ems_gamma;
  report.score = (s - t) / std::sqrt(t);
  report.p_value = upper_gamma_q(t, s);
  report.n_effective = static_cast<int>(tokens.size());
  report.threshold = threshold;
  report.decision = report.p_value <= threshold;
  return report;
}

DetectionReport autocov_p_value(std::span<const Token> tokens, std::uint64_t key,
                                double gamma, const Vocabulary& vocab,
                                double threshold) {
  if (tokens.size() < 3) throw std::invalid_argument("need at least three tokens");
  const auto t = tokens.size();
  std::vector<double> centered(t);
  Token prev = initial_token(key, vocab);
  for (std::size_t i = 0; i < t; ++i) {
    const GreenMask mask = partition(key, prev, gamma, vocab);
    centered[i] = (mask.green(tokens[i]) ? 1.0 : 0.0) - gamma;
    prev = tokens[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) s += centered[i] * centered[i + 1];
  s /= static_cast<double>(t);
  const double z = std::sqrt(static_cast<double>(t)) * s / (gamma * (1.0 - gamma));
  DetectionReport report;
  report.method = DetectMethod::autocov_normal;
  report.score = z;
  report.p_value = normal_cdf(z);
  report.n_effective = static_cast<int>(t);
  report.threshold = threshold;
  report.decision = report.p_value <= threshold;
  return report;
}

double alpha_bound(double gamma, double z0) {
  if (z0 < 0.0) throw std::invalid_argument("z0 must be nonnegative");
  return std::min(1.0, std::exp(-2.0 * gamma * (1.0 - gamma) * z0 * z0));
}

double beta_bound(double delta_target, int t, double gamma, double z0) {
  if (t < 2) throw std::invalid_argument("T must be at least 2");
  const double base =
      delta_target * std::sqrt(t - 1.0) - std::sqrt(gamma * (1.0 - gamma)) * z0;
  if (base <= 0.0) return 1.0;  // the Hoeffding argument is one-sided
  return std::min(1.0, std::exp(-2.0 * base * base));
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::deletion: return "deletion";
    case AttackKind::insertion: return "insertion";
    case AttackKind::substitution: return "substitution";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "deletion") return AttackKind::deletion;
  if (name == "insertion") return AttackKind::insertion;
  if (name == "substitution" || name == "edit") return AttackKind::substitution;
  throw std::invalid_argument("unknown attack kind: " + name);
}

double adjusted_delta(AttackKind kind, double delta_target, double gamma,
                      double rate, int t) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("rate outside [0, 1)");
  if (t < 1) throw std::invalid_argument("T must be positive");
  switch (kind) {
    case AttackKind::deletion:
      return (delta_target - rate + rate * gamma) / (1.0 - rate);
    case AttackKind::insertion:
      return (delta_target - rate * gamma - 1.0 / t) / (1.0 + rate);
    case AttackKind::substitution:
      return delta_target - rate - 1.0 / t;
  }
  return delta_target;
}

}  // namespace wmlab
