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
// Key-side detection: green recounting, score statistics and p-values for
// all four watermark families, and the analytic error / attack bounds.

#ifndef WMLAB_DETECT_HPP_
#define WMLAB_DETECT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "wmlab/lm.hpp"

namespace wmlab {

enum class DetectMethod { green_z, green_binomial, ems_gamma, autocov_normal };

std::string to_string(DetectMethod method);
DetectMethod detect_method_from_string(const std::string& name);

struct DetectionReport {
  DetectMethod method = DetectMethod::green_binomial;
  double score = 0.0;
  double p_value = 1.0;
  int n_effective = 0;
  bool decision = false;
  double threshold = 0.0;
};

// Recomputed green flags for tokens 2..T (token t keyed by token t-1);
// returns (green count, T - 1). Requires at least two tokens.
std::pair<int, int> count_green(std::span<const Token> tokens, std::uint64_t key,
                                double gamma, const Vocabulary& vocab);

// (count - gamma n) / sqrt(n gamma (1 - gamma)).
double z_score(int count, int n, double gamma);

// Exact binomial tail P(S >= count); the >= convention keeps the p-value
// superuniform under the null.
double binom_p_value(int count, int n, double gamma);

DetectionReport detect_green_z(std::span<const Token> tokens, std::uint64_t key,
                               double gamma, const Vocabulary& vocab,
                               double threshold);
DetectionReport detect_green_binomial(std::span<const Token> tokens,
                                      std::uint64_t key, double gamma,
                                      const Vocabulary& vocab, double threshold);

// Replays the key-derived r values, scores S_T = sum -log(1 - r_{t, y_t}),
// and evaluates the exact Gamma(T, 1) upper tail. The reported score is the
// normal form (S_T - T) / sqrt(T).
DetectionReport ems_p_value(std::span<const Token> tokens, std::uint64_t key,
                            const Vocabulary& vocab, double threshold);

// Lag-1 autocovariance of the centered green indicators; the watermark
// drives it negative, so the test is one-sided lower tail.
DetectionReport autocov_p_value(std::span<const Token> tokens, std::uint64_t key,
                                double gamma, const Vocabulary& vocab,
                                double threshold);

// Type I bound: exp(-2 gamma (1 - gamma) z0^2), capped at 1.
double alpha_bound(double gamma, double z0);

// Type II bound: exp(-2 (target sqrt(T-1) - sqrt(gamma (1-gamma)) z0)^2),
// vacuous (1) when the squared term's base is negative.
double beta_bound(double delta_target, int t, double gamma, double z0);

enum class AttackKind { deletion, insertion, substitution };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

// Attack-adjusted DG target; may be negative, meaning no guarantee remains.
double adjusted_delta(AttackKind kind, double delta_target, double gamma,
                      double rate, int t);

}  // namespace wmlab

#endif  // WMLAB_DETECT_HPP_
