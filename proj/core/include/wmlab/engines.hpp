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
// The generators: constant-boost green-list watermark (SRL), the online
// dual-ascent watermark (DualGA), its autocovariance variant, exponential
// minimum sampling (EMS), and an unwatermarked sampler. Each emits a full
// per-step trace.

#ifndef WMLAB_ENGINES_HPP_
#define WMLAB_ENGINES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "wmlab/lm.hpp"

namespace wmlab {

struct SrlParams {
  double gamma = 0.5;
  double delta = 0.0;
  std::uint64_t key = 0;
  int t_max = 1;
};

struct DualGaParams {
  double gamma = 0.5;
  double delta_target = 0.25;  // must sit in (0, 1 - gamma)
  double eta = 0.5;
  double lambda_init = 0.0;
  double lambda_cap = 50.0;
  std::uint64_t key = 0;
  int t_max = 1;
};

struct EmsParams {
  double temperature = 1.0;
  std::uint64_t key = 0;
  int t_max = 1;
};

struct PlainParams {
  double gamma = 0.5;       // only used to annotate green flags
  std::uint64_t key = 0;    // detection key for calibration studies
  std::uint64_t rng_seed = 0;
  int t_max = 1;
};

struct StepRecord {
  Token token = 0;
  bool green = false;
  double g_mass = 0.0;      // original-model mass on the step's green list
  double delta_used = 0.0;
  double lambda = 0.0;      // 0 for non-dual engines
  double dg_realized = 0.0;
  double kl_realized = 0.0;
};

struct GenerationTrace {
  std::string engine;
  Vocabulary vocab;
  double gamma = 0.0;
  std::uint64_t key = 0;
  int seq_index = 0;

  // steps and tokens run to t_max; entries past effective_len are the
  // terminator padding required by the generation contract.
  std::vector<StepRecord> steps;
  std::vector<Token> tokens;
  int effective_len = 0;
  bool terminated_early = false;

  // Summary statistics over the effective (non-padding) steps.
  double mean_dg() const;
  double mean_kl() const;
  int green_count() const;
  std::vector<Token> effective_tokens() const;
};

// q_k proportional to exp(l_k + delta * 1{k green}), via stable softmax.
Probs apply_green_boost(const Logits& logits, const GreenMask& mask, double delta);

// Per-step sampling uniform shared by the watermark engines and the plain
// sampler; step is 1-based.
inline double sampling_uniform(std::uint64_t seed, int step) {
  return to_unit(mix64(mix64(seed) ^ mix64(static_cast<std::uint64_t>(step))));
}

GenerationTrace srl_generate(const LanguageModel& lm, const Context& prompt,
                             const SrlParams& params, std::uint64_t sample_seed);
GenerationTrace dualga_generate(const LanguageModel& lm, const Context& prompt,
                                const DualGaParams& params, std::uint64_t sample_seed);
GenerationTrace autocov_generate(const LanguageModel& lm, const Context& prompt,
                                 const DualGaParams& params, std::uint64_t sample_seed);
GenerationTrace ems_generate(const LanguageModel& lm, const Context& prompt,
                             const EmsParams& params);
GenerationTrace plain_generate(const LanguageModel& lm, const Context& prompt,
                               const PlainParams& params);

// EMS per-step key-derived uniform for token k following prev; also used by
// the detector to replay r values.
double ems_r_value(std::uint64_t key, Token prev, Token k);

// Line-delimited trace format: a header record, one record per step, and a
// closing summary record.
void write_trace(const GenerationTrace& trace, const std::string& path);
GenerationTrace read_trace(const std::string& path);

}  // namespace wmlab

#endif  // WMLAB_ENGINES_HPP_
