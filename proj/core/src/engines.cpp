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

#include "wmlab/engines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "wmlab/dual.hpp"

namespace wmlab {

namespace {

double kl_between(const Probs& q, const Probs& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] > 0.0) s += q[k] * std::log(q[k] / p[k]);
  }
  return std::max(0.0, s);
}

void check_common(double gamma, int t_max) {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma outside (0, 1)");
  if (t_max < 1) throw std::invalid_argument("t_max must be positive");
}

// After the terminator, both the original and the watermarked model keep
// emitting the terminator, so padding steps carry zero boost and zero KL.
void pad_with_terminator(GenerationTrace& trace, std::uint64_t key, double gamma,
                         const Vocabulary& vocab, int t_max, double lambda) {
  trace.effective_len = static_cast<int>(trace.tokens.size());
  trace.terminated_early = trace.effective_len < t_max &&
                           !trace.tokens.empty() &&
                           trace.tokens.back() == vocab.term_token;
  while (static_cast<int>(trace.tokens.size()) < t_max) {
    const Token prev = trace.tokens.back();
    const GreenMask mask = partition(key, prev, gamma, vocab);
    StepRecord rec;
    rec.token = vocab.term_token;
    rec.green = mask.green(vocab.term_token);
    rec.g_mass = rec.green ? 1.0 : 0.0;
    rec.lambda = lambda;
    trace.steps.push_back(rec);
    trace.tokens.push_back(vocab.term_token);
  }
}

}  // namespace

double GenerationTrace::mean_dg() const {
  if (effective_len == 0) return 0.0;
  double s = 0.0;
  for (int t = 0; t < effective_len; ++t) s += steps[static_cast<std::size_t>(t)].dg_realized;
  return s / effective_len;
}

double GenerationTrace::mean_kl() const {
  if (effective_len == 0) return 0.0;
  double s = 0.0;
  for (int t = 0; t < effective_len; ++t) s += steps[static_cast<std::size_t>(t)].kl_realized;
  return s / effective_len;
}

int GenerationTrace::green_count() const {
  int c = 0;
  for (int t = 0; t < effective_len; ++t) c += steps[static_cast<std::size_t>(t)].green ? 1 : 0;
  return c;
}

std::vector<Token> GenerationTrace::effective_tokens() const {
  return {tokens.begin(), tokens.begin() + effective_len};
}

Probs apply_green_boost(const Logits& logits, const GreenMask& mask, double delta) {
  if (logits.size() != mask.bits.size()) throw std::invalid_argument("length mismatch");
  Logits boosted(logits);
  for (std::size_t k = 0; k < boosted.size(); ++k) {
    if (mask.bits[k]) boosted[k] += delta;
  }
  return softmax(boosted);
}

GenerationTrace srl_generate(const LanguageModel& lm, const Context& prompt,
                             const SrlParams& params, std::uint64_t sample_seed) {
  check_common(params.gamma, params.t_max);
  if (params.delta < 0.0) throw std::invalid_argument("delta must be nonnegative");
  const Vocabulary& vocab = lm.vocabulary();

  GenerationTrace trace;
  trace.engine = "srl";
  trace.vocab = vocab;
  trace.gamma = params.gamma;
  trace.key = params.key;

  Context ctx = prompt;
  Token prev = ctx.last(initial_token(params.key, vocab));
  for (int t = 1; t <= params.t_max; ++t) {
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    const Logits logits = lm.next_logits(ctx);
    const Probs p = softmax(logits);
    const Probs q = apply_green_boost(logits, mask, params.delta);
    const Token y = sample_token(q, sampling_uniform(sample_seed, t));

    StepRecord rec;
    rec.token = y;
    rec.green = mask.green(y);
    rec.g_mass = green_mass(p, mask);
    rec.delta_used = params.delta;
    rec.dg_realized = green_mass(q, mask) - rec.g_mass;
    rec.kl_realized = kl_between(q, p);
    trace.steps.push_back(rec);
    trace.tokens.push_back(y);
    ctx.generated.push_back(y);
    prev = y;
    if (y == vocab.term_token) break;
  }
  pad_with_terminator(trace, params.key, params.gamma, vocab, params.t_max, 0.0);
  return trace;
}

GenerationTrace dualga_generate(const LanguageModel& lm, const Context& prompt,
                                const DualGaParams& params, std::uint64_t sample_seed) {
  check_common(params.gamma, params.t_max);
  if (params.delta_target < 0.0 || params.delta_target >= 1.0 - params.gamma) {
    throw std::invalid_argument("DG target outside [0, 1 - gamma)");
  }
  if (params.lambda_init < 0.0 || params.lambda_init > params.lambda_cap) {
    throw std::invalid_argument("lambda_init outside [0, lambda_cap]");
  }
  const Vocabulary& vocab = lm.vocabulary();

  GenerationTrace trace;
  trace.engine = "dualga";
  trace.vocab = vocab;
  trace.gamma = params.gamma;
  trace.key = params.key;

  Context ctx = prompt;
  Token prev = ctx.last(initial_token(params.key, vocab));
  double lambda = params.lambda_init;
  for (int t = 1; t <= params.t_max; ++t) {
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    const Logits logits = lm.next_logits(ctx);
    const Probs p = softmax(logits);
    const double g = green_mass(p, mask);
    const double delta = lambda;
    const Probs q = apply_green_boost(logits, mask, delta);
    const Token y = sample_token(q, sampling_uniform(sample_seed, t));

    StepRecord rec;
    rec.token = y;
    rec.green = mask.green(y);
    rec.g_mass = g;
    rec.delta_used = delta;
    rec.lambda = lambda;
    rec.dg_realized = green_mass(q, mask) - g;
    rec.kl_realized = kl_between(q, p);
    trace.steps.push_back(rec);
    trace.tokens.push_back(y);

    // Ascent step on the dual; the gradient uses the closed-form gain, a
    // deterministic function of (g, delta), not the sampled token.
    lambda += params.eta * (params.delta_target - dg_closed_form(g, delta));
    lambda = std::clamp(lambda, 0.0, params.lambda_cap);

    ctx.generated.push_back(y);
    prev = y;
    if (y == vocab.term_token) break;
  }
  pad_with_terminator(trace, params.key, params.gamma, vocab, params.t_max, lambda);
  return trace;
}

GenerationTrace autocov_generate(const LanguageModel& lm, const Context& prompt,
                                 const DualGaParams& params, std::uint64_t sample_seed) {
  check_common(params.gamma, params.t_max);
  if (params.lambda_init < 0.0 || params.lambda_init > params.lambda_cap) {
    throw std::invalid_argument("lambda_init outside [0, lambda_cap]");
  }
  const Vocabulary& vocab = lm.vocabulary();

  GenerationTrace trace;
  trace.engine = "autocov";
  trace.vocab = vocab;
  trace.gamma = params.gamma;
  trace.key = params.key;

  Context ctx = prompt;
  Token prev = ctx.last(initial_token(params.key, vocab));
  bool prev_green = false;  // the pre-first token is colored red
  double lambda = params.lambda_init;
  for (int t = 1; t <= params.t_max; ++t) {
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    const Logits logits = lm.next_logits(ctx);
    const Probs p = softmax(logits);
    const double g = green_mass(p, mask);
    const double delta = lambda;

    // Boost the color opposite to the previous token's realized color.
    Probs q;
    if (!prev_green) {
      q = apply_green_boost(logits, mask, delta);
    } else {
      Logits boosted(logits);
      for (std::size_t k = 0; k < boosted.size(); ++k) {
        if (!mask.bits[k]) boosted[k] += delta;
      }
      q = softmax(boosted);
    }
    const Token y = sample_token(q, sampling_uniform(sample_seed, t));

    StepRecord rec;
    rec.token = y;
    rec.green = mask.green(y);
    rec.g_mass = g;
    rec.delta_used = delta;
    rec.lambda = lambda;
    rec.dg_realized = green_mass(q, mask) - g;
    rec.kl_realized = kl_between(q, p);
    trace.steps.push_back(rec);
    trace.tokens.push_back(y);

    // -DA_t weighs the boosted color's gain: gamma when pushing green after
    // a red token, (1 - gamma) when pushing red after a green one.
    const double minus_da = !prev_green
                                ? params.gamma * dg_closed_form(g, delta)
                                : (1.0 - params.gamma) * dg_closed_form(1.0 - g, delta);
    lambda += params.eta * (params.delta_target - minus_da);
    lambda = std::clamp(lambda, 0.0, params.lambda_cap);

    ctx.generated.push_back(y);
    prev = y;
    prev_green = rec.green;
    if (y == vocab.term_token) break;
  }
  pad_with_terminator(trace, params.key, params.gamma, vocab, params.t_max, lambda);
  return trace;
}

double ems_r_value(std::uint64_t key, Token prev, Token k) {
  const std::uint64_t seed = mix64(key ^ mix64(static_cast<std::uint64_t>(prev) + 1));
  return to_unit(mix64(seed ^ mix64(static_cast<std::uint64_t>(k) + 1)));
}

GenerationTrace ems_generate(const LanguageModel& lm, const Context& prompt,
                             const EmsParams& params) {
  if (params.temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (params.t_max < 1) throw std::invalid_argument("t_max must be positive");
  const Vocabulary& vocab = lm.vocabulary();

  GenerationTrace trace;
  trace.engine = "ems";
  trace.vocab = vocab;
  trace.key = params.key;

  Context ctx = prompt;
  Token prev = ctx.last(initial_token(params.key, vocab));
  for (int t = 1; t <= params.t_max; ++t) {
    Logits logits = lm.next_logits(ctx);
    for (double& l : logits) l /= params.temperature;
    const Probs p = softmax(logits);

    Token best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] <= 0.0) continue;
      const double score = -std::log(ems_r_value(params.key, prev, static_cast<Token>(k))) / p[k];
      if (score < best_score) {
        best_score = score;
        best = static_cast<Token>(k);
      }
    }

    StepRecord rec;
    rec.token = best;
    // Given the key the step distribution is a point mass, so the realized
    // per-step divergence from p is -log p at the chosen token.
    rec.kl_realized = -std::log(std::max(p[static_cast<std::size_t>(best)], 1e-300));
    trace.steps.push_back(rec);
    trace.tokens.push_back(best);
    ctx.generated.push_back(best);
    prev = best;
    if (best == vocab.term_token) break;
  }

  trace.effective_len = static_cast<int>(trace.tokens.size());
  trace.terminated_early = trace.effective_len < params.t_max;
  while (static_cast<int>(trace.tokens.size()) < params.t_max) {
    StepRecord rec;
    rec.token = vocab.term_token;
    trace.steps.push_back(rec);
    trace.tokens.push_back(vocab.term_token);
  }
  return trace;
}

GenerationTrace plain_generate(const LanguageModel& lm, const Context& prompt,
                               const PlainParams& params) {
  check_common(params.gamma, params.t_max);
  const Vocabulary& vocab = lm.vocabulary();

  GenerationTrace trace;
  trace.engine = "plain";
  trace.vocab = vocab;
  trace.gamma = params.gamma;
  trace.key = params.key;

  Context ctx = prompt;
  Token prev = ctx.last(initial_token(params.key, vocab));
  for (int t = 1; t <= params.t_max; ++t) {
    const GreenMask mask = partition(params.key, prev, params.gamma, vocab);
    const Probs p = softmax(lm.next_logits(ctx));
    const Token y = sample_token(p, sampling_uniform(params.rng_seed, t));

    StepRecord rec;
    rec.token = y;
    rec.green = mask.green(y);
    rec.g_mass = green_mass(p, mask);
    trace.steps.push_back(rec);
    trace.tokens.push_back(y);
    ctx.generated.push_back(y);
    prev = y;
    if (y == vocab.term_token) break;
  }
  pad_with_terminator(trace, params.key, params.gamma, vocab, params.t_max, 0.0);
  return trace;
}

namespace {

using nlohmann::json;

}  // namespace

void write_trace(const GenerationTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  json header;
  header["type"] = "wmlab_trace";
  header["engine"] = trace.engine;
  header["vocab_size"] = trace.vocab.size;
  header["term_token"] = trace.vocab.term_token;
  header["gamma"] = trace.gamma;
  header["key"] = trace.key;
  header["seq_index"] = trace.seq_index;
  out << header.dump() << "\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const StepRecord& r = trace.steps[t];
    json rec;
    rec["t"] = t + 1;
    rec["token"] = r.token;
    rec["green"] = r.green;
    rec["g_mass"] = r.g_mass;
    rec["delta"] = r.delta_used;
    rec["lambda"] = r.lambda;
    rec["dg"] = r.dg_realized;
    rec["kl"] = r.kl_realized;
    out << rec.dump() << "\n";
  }
  json summary;
  summary["summary"] = {{"token_count", trace.effective_len},
                        {"green_count", trace.green_count()},
                        {"mean_dg", trace.mean_dg()},
                        {"mean_kl", trace.mean_kl()},
                        {"terminated_early", trace.terminated_early}};
  out << summary.dump() << "\n";
}

GenerationTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path);
  const json header = json::parse(line);
  if (header.value("type", "") != "wmlab_trace") {
    throw std::runtime_error("not a wmlab trace file: " + path);
  }
  GenerationTrace trace;
  trace.engine = header.at("engine").get<std::string>();
  trace.vocab.size = header.at("vocab_size").get<std::int32_t>();
  trace.vocab.term_token = header.at("term_token").get<Token>();
  trace.gamma = header.at("gamma").get<double>();
  trace.key = header.at("key").get<std::uint64_t>();
  trace.seq_index = header.value("seq_index", 0);
  bool saw_summary = false;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json rec = json::parse(line);
    if (rec.contains("summary")) {
      const json& s = rec.at("summary");
      trace.effective_len = s.at("token_count").get<int>();
      trace.terminated_early = s.at("terminated_early").get<bool>();
      saw_summary = true;
      continue;
    }
    StepRecord r;
    r.token = rec.at("token").get<Token>();
    r.green = rec.at("green").get<bool>();
    r.g_mass = rec.at("g_mass").get<double>();
    r.delta_used = rec.at("delta").get<double>();
    r.lambda = rec.at("lambda").get<double>();
    r.dg_realized = rec.at("dg").get<double>();
    r.kl_realized = rec.at("kl").get<double>();
    trace.steps.push_back(r);
    trace.tokens.push_back(r.token);
  }
  if (!saw_summary) throw std::runtime_error("trace file missing summary record: " + path);
  if (trace.effective_len > static_cast<int>(trace.steps.size())) {
    throw std::runtime_error("trace summary inconsistent with steps: " + path);
  }
  return trace;
}

}  // namespace wmlab
