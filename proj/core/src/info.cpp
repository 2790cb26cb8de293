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

#include "wmlab/info.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wmlab/dual.hpp"

namespace wmlab {

namespace {

constexpr double kEnumerationCap = 1e6;

void check_enumerable(const JointModel& model) {
  const double outcomes =
      std::pow(static_cast<double>(model.vocab.size), static_cast<double>(model.horizon));
  if (model.horizon < 1) throw std::invalid_argument("horizon must be positive");
  if (outcomes > kEnumerationCap) {
    throw std::invalid_argument("joint model too large to enumerate");
  }
}

void check_matching(const FiniteDistribution& q, const FiniteDistribution& p) {
  if (q.support.size() != p.support.size() || q.support != p.support) {
    throw std::invalid_argument("supports do not match");
  }
  if (q.probs.size() != q.support.size() || p.probs.size() != p.support.size()) {
    throw std::invalid_argument("probs and support lengths differ");
  }
}

// Once the terminator appears, the model keeps emitting it.
Probs terminator_row(const Vocabulary& vocab) {
  Probs row(static_cast<std::size_t>(vocab.size), 0.0);
  row[static_cast<std::size_t>(vocab.term_token)] = 1.0;
  return row;
}

bool saw_terminator(const Context& ctx, const Vocabulary& vocab) {
  return !ctx.generated.empty() && ctx.generated.back() == vocab.term_token;
}

}  // namespace

KlValue kl(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) throw std::invalid_argument("length mismatch");
  KlValue out;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    if (p[i] <= 0.0) {
      out.infinite = true;
      return out;
    }
    out.value += q[i] * std::log(q[i] / p[i]);
  }
  out.value = std::max(0.0, out.value);
  return out;
}

KlValue kl(const FiniteDistribution& q, const FiniteDistribution& p) {
  check_matching(q, p);
  return kl(std::span<const double>(q.probs), std::span<const double>(p.probs));
}

double tv(const FiniteDistribution& q, const FiniteDistribution& p) {
  check_matching(q, p);
  double s = 0.0;
  for (std::size_t i = 0; i < q.probs.size(); ++i) {
    s += std::abs(q.probs[i] - p.probs[i]);
  }
  return 0.5 * s;
}

double le_cam_errors(const FiniteDistribution& q, const FiniteDistribution& p) {
  return 1.0 - tv(q, p);
}

double entropy(const Probs& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

ConditionalModel conditional_from_lm(const LanguageModel& lm) {
  const Vocabulary vocab = lm.vocabulary();
  return [&lm, vocab](const Context& ctx) -> Probs {
    if (saw_terminator(ctx, vocab)) return terminator_row(vocab);
    return softmax(lm.next_logits(ctx));
  };
}

JointModel joint_from_lm(const LanguageModel& lm, Context prompt, int horizon) {
  JointModel model;
  model.conditional = conditional_from_lm(lm);
  model.vocab = lm.vocabulary();
  model.prompt = std::move(prompt);
  model.horizon = horizon;
  return model;
}

JointModel joint_srl(const LanguageModel& lm, Context prompt, int horizon,
                     const SrlParams& params) {
  JointModel model;
  model.vocab = lm.vocabulary();
  model.prompt = std::move(prompt);
  model.horizon = horizon;
  const Vocabulary vocab = model.vocab;
  model.conditional = [&lm, vocab, params](const Context& ctx) -> Probs {
    if (saw_terminator(ctx, vocab)) return terminator_row(vocab);
    const Token prev = ctx.last(initial_token(params.key, vocab));
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    return apply_green_boost(lm.next_logits(ctx), mask, params.delta);
  };
  return model;
}

JointModel joint_dualga(const LanguageModel& lm, Context prompt, int horizon,
                        const DualGaParams& params) {
  JointModel model;
  model.vocab = lm.vocabulary();
  model.prompt = std::move(prompt);
  model.horizon = horizon;
  const Vocabulary vocab = model.vocab;
  // The dual variable is a deterministic function of the realized prefix, so
  // the conditional replays the ascent recursion from scratch.
  model.conditional = [&lm, vocab, params](const Context& ctx) -> Probs {
    if (saw_terminator(ctx, vocab)) return terminator_row(vocab);
    double lambda = params.lambda_init;
    Context walk;
    walk.prompt = ctx.prompt;
    Token prev = walk.last(initial_token(params.key, vocab));
    for (const Token y : ctx.generated) {
      const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
      const double g = green_mass(softmax(lm.next_logits(walk)), mask);
      lambda += params.eta * (params.delta_target - dg_closed_form(g, lambda));
      lambda = std::clamp(lambda, 0.0, params.lambda_cap);
      walk.generated.push_back(y);
      prev = y;
    }
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    return apply_green_boost(lm.next_logits(ctx), mask, lambda);
  };
  return model;
}

FiniteDistribution enumerate_joint(const JointModel& model) {
  check_enumerable(model);
  FiniteDistribution dist;
  std::vector<Token> seq(static_cast<std::size_t>(model.horizon), 0);
  Context ctx = model.prompt;

  const std::function<void(int, double)> walk = [&](int depth, double prob) {
    if (depth == model.horizon) {
      dist.support.push_back(seq);
      dist.probs.push_back(prob);
      return;
    }
    const Probs row = model.conditional(ctx);
    for (Token k = 0; k < model.vocab.size; ++k) {
      seq[static_cast<std::size_t>(depth)] = k;
      ctx.generated.push_back(k);
      walk(depth + 1, prob * row[static_cast<std::size_t>(k)]);
      ctx.generated.pop_back();
    }
  };
  walk(0, 1.0);
  return dist;
}

ChainRuleResult chain_rule_check(const JointModel& q_model, const JointModel& p_model) {
  check_enumerable(q_model);
  if (q_model.vocab.size != p_model.vocab.size || q_model.horizon != p_model.horizon) {
    throw std::invalid_argument("joint models must share vocabulary and horizon");
  }
  ChainRuleResult result;
  Context q_ctx = q_model.prompt;
  Context p_ctx = p_model.prompt;

  // One pass over the sequence tree accumulates both sides: the full-path
  // terms give the joint KL, the per-node conditional KLs weighted by q's
  // prefix mass give the decomposition.
  const std::function<void(int, double, double)> walk = [&](int depth, double q_prob,
                                                            double p_prob) {
    if (q_prob == 0.0) return;
    if (depth == q_model.horizon) {
      if (p_prob <= 0.0) throw std::runtime_error("q not absolutely continuous wrt p");
      result.joint_kl += q_prob * std::log(q_prob / p_prob);
      return;
    }
    const Probs q_row = q_model.conditional(q_ctx);
    const Probs p_row = p_model.conditional(p_ctx);
    const KlValue step = kl(std::span<const double>(q_row), std::span<const double>(p_row));
    if (step.infinite) throw std::runtime_error("q not absolutely continuous wrt p");
    result.summed_conditional_kl += q_prob * step.value;
    for (Token k = 0; k < q_model.vocab.size; ++k) {
      q_ctx.generated.push_back(k);
      p_ctx.generated.push_back(k);
      walk(depth + 1, q_prob * q_row[static_cast<std::size_t>(k)],
           p_prob * p_row[static_cast<std::size_t>(k)]);
      q_ctx.generated.pop_back();
      p_ctx.generated.pop_back();
    }
  };
  walk(0, 1.0, 1.0);
  return result;
}

KlValue lop(std::span<const Token> y, const ConditionalModel& eval, const Context& x) {
  if (y.empty()) throw std::invalid_argument("empty token sequence");
  KlValue out;
  Context ctx = x;
  double sum = 0.0;
  for (const Token t : y) {
    const Probs row = eval(ctx);
    const double pr = row[static_cast<std::size_t>(t)];
    if (pr <= 0.0) {
      out.infinite = true;
      return out;
    }
    sum -= std::log(pr);
    ctx.generated.push_back(t);
  }
  out.value = sum / static_cast<double>(y.size());
  return out;
}

KlValue dlop(const JointModel& q_model, const JointModel& p_model,
             const ConditionalModel& eval) {
  check_enumerable(q_model);
  if (q_model.vocab.size != p_model.vocab.size || q_model.horizon != p_model.horizon) {
    throw std::invalid_argument("joint models must share vocabulary and horizon");
  }
  KlValue out;
  Context q_ctx = q_model.prompt;
  Context p_ctx = p_model.prompt;
  Context e_ctx = q_model.prompt;
  double expectation_gap = 0.0;

  const std::function<void(int, double, double, double)> walk =
      [&](int depth, double q_prob, double p_prob, double nll) {
        if (q_prob == 0.0 && p_prob == 0.0) return;
        if (depth == q_model.horizon) {
          expectation_gap += (q_prob - p_prob) * nll / static_cast<double>(q_model.horizon);
          return;
        }
        const Probs q_row = q_model.conditional(q_ctx);
        const Probs p_row = p_model.conditional(p_ctx);
        const Probs e_row = eval(e_ctx);
        for (Token k = 0; k < q_model.vocab.size; ++k) {
          const auto ks = static_cast<std::size_t>(k);
          const double qn = q_prob * q_row[ks];
          const double pn = p_prob * p_row[ks];
          if (qn == 0.0 && pn == 0.0) continue;
          if (e_row[ks] <= 0.0) {
            out.infinite = true;
            return;
          }
          q_ctx.generated.push_back(k);
          p_ctx.generated.push_back(k);
          e_ctx.generated.push_back(k);
          walk(depth + 1, qn, pn, nll - std::log(e_row[ks]));
          q_ctx.generated.pop_back();
          p_ctx.generated.pop_back();
          e_ctx.generated.pop_back();
          if (out.infinite) return;
        }
      };
  walk(0, 1.0, 1.0, 0.0);
  if (!out.infinite) out.value = expectation_gap;
  return out;
}

JointModel greedy_argmax_lm(const JointModel& p_model) {
  const FiniteDistribution dist = enumerate_joint(p_model);
  const auto n = static_cast<double>(dist.probs.size());
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < dist.probs.size(); ++i) {
    const double score = dist.probs[i] + 1e-9 * (static_cast<double>(i) / n);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  const std::vector<Token> path = dist.support[best];

  JointModel q;
  q.vocab = p_model.vocab;
  q.prompt = p_model.prompt;
  q.horizon = p_model.horizon;
  const std::int32_t vocab_size = p_model.vocab.size;
  q.conditional = [path, vocab_size](const Context& ctx) -> Probs {
    Probs row(static_cast<std::size_t>(vocab_size), 0.0);
    const std::size_t depth = std::min(ctx.generated.size(), path.size() - 1);
    row[static_cast<std::size_t>(path[depth])] = 1.0;
    return row;
  };
  return q;
}

EmsMarginalReport ems_marginal_and_kl(const LanguageModel& lm, const Context& ctx,
                                      int n_keys, std::uint64_t seed) {
  if (n_keys < 1) throw std::invalid_argument("need at least one key");
  const Vocabulary vocab = lm.vocabulary();
  const Probs p = softmax(lm.next_logits(ctx));
  const auto v = p.size();

  std::vector<double> freq(v, 0.0);
  double kl_sum = 0.0;
  for (int i = 0; i < n_keys; ++i) {
    const std::uint64_t key = mix64(seed ^ mix64(static_cast<std::uint64_t>(i) + 1));
    const Token prev = ctx.last(initial_token(key, vocab));
    Token best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v; ++k) {
      if (p[k] <= 0.0) continue;
      const double score = -std::log(ems_r_value(key, prev, static_cast<Token>(k))) / p[k];
      if (score < best_score) {
        best_score = score;
        best = static_cast<Token>(k);
      }
    }
    freq[static_cast<std::size_t>(best)] += 1.0;
    kl_sum += -std::log(p[static_cast<std::size_t>(best)]);
  }

  EmsMarginalReport report;
  for (std::size_t k = 0; k < v; ++k) {
    report.max_marginal_gap =
        std::max(report.max_marginal_gap, std::abs(freq[k] / n_keys - p[k]));
  }
  report.mean_kl = kl_sum / n_keys;
  report.entropy = entropy(p);
  return report;
}

}  // namespace wmlab
