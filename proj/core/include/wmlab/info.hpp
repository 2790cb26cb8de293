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
// Exact information-theoretic computations on enumerable toy models:
// divergences, the token-wise KL decomposition, detector error floors,
// log-perplexity comparisons, and the key-averaged analysis of exponential
// minimum sampling.

#ifndef WMLAB_INFO_HPP_
#define WMLAB_INFO_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wmlab/engines.hpp"
#include "wmlab/lm.hpp"

namespace wmlab {

// KL with an explicit infinity flag; never a sentinel number.
struct KlValue {
  double value = 0.0;
  bool infinite = false;
};

// A distribution over distinct outcome sequences. Pairs passed to the
// divergence functions must share the same support in the same order.
struct FiniteDistribution {
  std::vector<std::vector<Token>> support;
  std::vector<double> probs;
};

KlValue kl(const FiniteDistribution& q, const FiniteDistribution& p);
KlValue kl(std::span<const double> q, std::span<const double> p);
double tv(const FiniteDistribution& q, const FiniteDistribution& p);

// Optimal-detector error floor alpha + beta = 1 - TV (the likelihood-ratio
// region is optimal).
double le_cam_errors(const FiniteDistribution& q, const FiniteDistribution& p);

double entropy(const Probs& p);

// Conditional next-token law as a function of the context.
using ConditionalModel = std::function<Probs(const Context&)>;

// An autoregressive model restricted to a fixed horizon, small enough to
// enumerate exactly (|V|^T capped at 1e6).
struct JointModel {
  ConditionalModel conditional;
  Vocabulary vocab;
  Context prompt;
  int horizon = 1;
};

ConditionalModel conditional_from_lm(const LanguageModel& lm);
JointModel joint_from_lm(const LanguageModel& lm, Context prompt, int horizon);
JointModel joint_srl(const LanguageModel& lm, Context prompt, int horizon,
                     const SrlParams& params);
JointModel joint_dualga(const LanguageModel& lm, Context prompt, int horizon,
                        const DualGaParams& params);

FiniteDistribution enumerate_joint(const JointModel& model);

struct ChainRuleResult {
  double joint_kl = 0.0;
  double summed_conditional_kl = 0.0;
};

// Joint KL over the sequence space against the sum over steps of the
// conditional KLs weighted by q's prefix marginals; the two must agree.
ChainRuleResult chain_rule_check(const JointModel& q_model, const JointModel& p_model);

// Mean negative log-likelihood of y under the evaluation model.
KlValue lop(std::span<const Token> y, const ConditionalModel& eval, const Context& x);

// Difference of expected log-perplexity, E_q[LoP] - E_p[LoP], by exhaustive
// enumeration.
KlValue dlop(const JointModel& q_model, const JointModel& p_model,
             const ConditionalModel& eval);

// The deterministic model that follows the globally most likely sequence of
// p. Ties are broken by a 1e-9 jitter scaled by the outcome's position in
// enumeration order.
JointModel greedy_argmax_lm(const JointModel& p_model);

struct EmsMarginalReport {
  double max_marginal_gap = 0.0;
  double mean_kl = 0.0;
  double entropy = 0.0;
};

// Tallies the EMS choice at one context over n_keys independent keys: the
// marginal gap vanishes while the mean realized KL matches the entropy.
EmsMarginalReport ems_marginal_and_kl(const LanguageModel& lm, const Context& ctx,
                                      int n_keys, std::uint64_t seed);

}  // namespace wmlab

#endif  // WMLAB_INFO_HPP_
