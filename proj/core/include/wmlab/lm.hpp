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
// Vocabulary types, synthetic language models, the seeded green/red
// partition, and token sampling.

#ifndef WMLAB_LM_HPP_
#define WMLAB_LM_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wmlab/rng.hpp"

namespace wmlab {

using Token = std::int32_t;
using Logits = std::vector<double>;
using Probs = std::vector<double>;

struct Vocabulary {
  std::int32_t size = 0;
  Token term_token = 0;
};

// Prompt plus previously generated tokens.
struct Context {
  std::vector<Token> prompt;
  std::vector<Token> generated;

  // Last observed token: generated tail, else prompt tail, else `fallback`.
  Token last(Token fallback) const {
    if (!generated.empty()) return generated.back();
    if (!prompt.empty()) return prompt.back();
    return fallback;
  }
};

// One step's green/red split of the vocabulary. `green_count` equals the
// number of set bits, which is ceil(gamma * |V|) by construction.
struct GreenMask {
  std::vector<std::uint8_t> bits;
  double gamma = 0.0;
  std::int32_t green_count = 0;

  bool green(Token k) const { return bits[static_cast<std::size_t>(k)] != 0; }
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  // Must be deterministic in the context.
  virtual Logits next_logits(const Context& ctx) const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
};

// Order-1 Markov chain over the vocabulary. Rows are validated to be
// stochastic on construction; zero entries are floored at 1e-300 before the
// log so the logits stay finite.
class MarkovLM final : public LanguageModel {
 public:
  MarkovLM(Vocabulary vocab, Probs initial, std::vector<Probs> transition);

  Logits next_logits(const Context& ctx) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }

  const Probs& initial() const { return initial_; }
  const std::vector<Probs>& transition() const { return transition_; }

 private:
  Vocabulary vocab_;
  Probs initial_;
  std::vector<Probs> transition_;
  Logits log_initial_;
  std::vector<Logits> log_rows_;
};

// Plays back a fixed list of logit rows; row t is served once t tokens have
// been generated. Querying past the last row throws.
class ReplayLM final : public LanguageModel {
 public:
  ReplayLM(Vocabulary vocab, std::vector<Logits> rows);

  Logits next_logits(const Context& ctx) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }

  std::size_t row_count() const { return rows_.size(); }

 private:
  Vocabulary vocab_;
  std::vector<Logits> rows_;
};

// Numerically stable softmax (max subtraction); output sums to 1 within
// 1e-12 and is invariant to constant shifts of the logits.
Probs softmax(const Logits& logits);

// Seeded partition of the vocabulary: the ceil(gamma * |V|) indices with
// the smallest mix64 scores are green, ties broken toward smaller index.
// Pure function of (key, prev, gamma, |V|).
GreenMask partition(std::uint64_t key, Token prev, double gamma,
                    const Vocabulary& vocab);

double green_mass(const Probs& p, const GreenMask& mask);
double red_mass(const Probs& p, const GreenMask& mask);

// Inverse-CDF sampling: smallest k whose cumulative mass strictly exceeds u.
Token sample_token(const Probs& p, double u);

// Seed convention shared by every engine: the pre-first token is the key
// reduced into the vocabulary.
inline Token initial_token(std::uint64_t key, const Vocabulary& vocab) {
  return static_cast<Token>(key % static_cast<std::uint64_t>(vocab.size));
}

void validate_probs(const Probs& p);

// File formats: a Markov model is a JSON document with fields vocab_size,
// term_token, initial, transition; a replay model is one JSON array of
// logits per line. load_lm sniffs between the two.
MarkovLM load_markov_lm(const std::string& path);
void save_markov_lm(const MarkovLM& lm, const std::string& path);
ReplayLM load_replay_lm(const std::string& path, Token term_token = -1);
std::unique_ptr<LanguageModel> load_lm(const std::string& path);

}  // namespace wmlab

#endif  // WMLAB_LM_HPP_
