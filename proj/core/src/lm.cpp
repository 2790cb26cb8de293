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

#include "wmlab/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace wmlab {

namespace {

constexpr double kProbFloor = 1e-300;

void check_row_stochastic(const Probs& row, const char* what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string(what) + ": row does not sum to 1");
  }
}

Logits log_floored(const Probs& row) {
  Logits out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) {
    out[k] = std::log(std::max(row[k], kProbFloor));
  }
  return out;
}

}  // namespace

void validate_probs(const Probs& p) {
  check_row_stochastic(p, "prob vector");
}

MarkovLM::MarkovLM(Vocabulary vocab, Probs initial, std::vector<Probs> transition)
    : vocab_(vocab), initial_(std::move(initial)), transition_(std::move(transition)) {
  if (vocab_.size < 2) throw std::invalid_argument("vocabulary size must be >= 2");
  if (vocab_.term_token < 0 || vocab_.term_token >= vocab_.size) {
    throw std::invalid_argument("term_token out of range");
  }
  const auto v = static_cast<std::size_t>(vocab_.size);
  if (initial_.size() != v || transition_.size() != v) {
    throw std::invalid_argument("initial/transition dimensions do not match vocab_size");
  }
  check_row_stochastic(initial_, "initial");
  for (const auto& row : transition_) {
    if (row.size() != v) throw std::invalid_argument("transition row width mismatch");
    check_row_stochastic(row, "transition");
  }
  log_initial_ = log_floored(initial_);
  log_rows_.reserve(v);
  for (const auto& row : transition_) log_rows_.push_back(log_floored(row));
}

Logits MarkovLM::next_logits(const Context& ctx) const {
  Token prev = -1;
  if (!ctx.generated.empty()) {
    prev = ctx.generated.back();
  } else if (!ctx.prompt.empty()) {
    prev = ctx.prompt.back();
  }
  if (prev < 0) return log_initial_;
  if (prev >= vocab_.size) throw std::out_of_range("token outside vocabulary");
  return log_rows_[static_cast<std::size_t>(prev)];
}

ReplayLM::ReplayLM(Vocabulary vocab, std::vector<Logits> rows)
    : vocab_(vocab), rows_(std::move(rows)) {
  if (rows_.empty()) throw std::invalid_argument("replay model needs at least one row");
  if (vocab_.size < 2) throw std::invalid_argument("vocabulary size must be >= 2");
  if (vocab_.term_token < 0 || vocab_.term_token >= vocab_.size) {
    throw std::invalid_argument("term_token out of range");
  }
  for (const auto& row : rows_) {
    if (row.size() != static_cast<std::size_t>(vocab_.size)) {
      throw std::invalid_argument("replay row width mismatch");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite logit in replay row");
    }
  }
}

Logits ReplayLM::next_logits(const Context& ctx) const {
  const std::size_t step = ctx.generated.size();
  if (step >= rows_.size()) {
    throw std::out_of_range("replay model queried past its last row");
  }
  return rows_[step];
}

Probs softmax(const Logits& logits) {
  if (logits.empty()) throw std::invalid_argument("empty logit vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Probs out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

GreenMask partition(std::uint64_t key, Token prev, double gamma,
                    const Vocabulary& vocab) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma outside [0, 1]");
  const auto v = static_cast<std::size_t>(vocab.size);

  // ceil(gamma * |V|) with a guard against products like 0.3 * 10 landing an
  // ulp above the integer they represent.
  const double target = gamma * static_cast<double>(vocab.size);
  auto green_size = static_cast<std::int32_t>(std::ceil(target));
  if (green_size > 0 &&
      static_cast<double>(green_size - 1) >= target - 1e-9 * std::max(1.0, target)) {
    --green_size;
  }
  green_size = std::clamp<std::int32_t>(green_size, 0, vocab.size);

  // mix64(k + 1) depends only on the index; cache it per thread since the
  // partition sits on the hot path of every generator and detector.
  thread_local std::vector<std::uint64_t> token_hash;
  while (token_hash.size() < v) {
    token_hash.push_back(mix64(static_cast<std::uint64_t>(token_hash.size()) + 1));
  }

  const std::uint64_t seed =
      mix64(key ^ mix64(static_cast<std::uint64_t>(prev) + 1));
  std::vector<std::pair<std::uint64_t, std::uint32_t>> scored(v);
  for (std::size_t k = 0; k < v; ++k) {
    scored[k] = {mix64(seed ^ token_hash[k]), static_cast<std::uint32_t>(k)};
  }
  if (green_size > 0 && green_size < vocab.size) {
    std::nth_element(scored.begin(), scored.begin() + (green_size - 1), scored.end());
  }

  GreenMask mask;
  mask.bits.assign(v, 0);
  mask.gamma = gamma;
  mask.green_count = green_size;
  for (std::int32_t i = 0; i < green_size; ++i) {
    mask.bits[scored[static_cast<std::size_t>(i)].second] = 1;
  }
  return mask;
}

double green_mass(const Probs& p, const GreenMask& mask) {
  if (p.size() != mask.bits.size()) throw std::invalid_argument("length mismatch");
  double g = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (mask.bits[k]) g += p[k];
  }
  return g;
}

double red_mass(const Probs& p, const GreenMask& mask) {
  if (p.size() != mask.bits.size()) throw std::invalid_argument("length mismatch");
  double r = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!mask.bits[k]) r += p[k];
  }
  return r;
}

Token sample_token(const Probs& p, double u) {
  double cum = 0.0;
  Token last_positive = -1;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) last_positive = static_cast<Token>(k);
    cum += p[k];
    if (cum > u) return static_cast<Token>(k);
  }
  // u fell into rounding slack at the very top of the CDF.
  if (last_positive < 0) throw std::invalid_argument("all-zero probability vector");
  return last_positive;
}

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

}  // namespace

MarkovLM load_markov_lm(const std::string& path) {
  const json j = parse_json_file(path);
  Vocabulary vocab;
  vocab.size = j.at("vocab_size").get<std::int32_t>();
  vocab.term_token = j.at("term_token").get<Token>();
  auto initial = j.at("initial").get<Probs>();
  auto transition = j.at("transition").get<std::vector<Probs>>();
  return MarkovLM(vocab, std::move(initial), std::move(transition));
}

void save_markov_lm(const MarkovLM& lm, const std::string& path) {
  json j;
  j["vocab_size"] = lm.vocabulary().size;
  j["term_token"] = lm.vocabulary().term_token;
  j["initial"] = lm.initial();
  j["transition"] = lm.transition();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << "\n";
}

ReplayLM load_replay_lm(const std::string& path, Token term_token) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Logits> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(json::parse(line).get<Logits>());
  }
  if (rows.empty()) throw std::runtime_error("replay file has no rows: " + path);
  Vocabulary vocab;
  vocab.size = static_cast<std::int32_t>(rows.front().size());
  vocab.term_token = term_token < 0 ? vocab.size - 1 : term_token;
  return ReplayLM(vocab, std::move(rows));
}

std::unique_ptr<LanguageModel> load_lm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  char c = 0;
  in >> c;
  in.close();
  if (c == '{') return std::make_unique<MarkovLM>(load_markov_lm(path));
  return std::make_unique<ReplayLM>(load_replay_lm(path));
}

}  // namespace wmlab
