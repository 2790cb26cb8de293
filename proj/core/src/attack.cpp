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

#include "wmlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wmlab/rng.hpp"

namespace wmlab {

namespace {

std::size_t attack_budget(std::size_t t, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("rate outside [0, 1)");
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(t)));
}

std::vector<std::uint8_t> recomputed_flags(std::span<const Token> tokens,
                                           std::uint64_t key, double gamma,
                                           const Vocabulary& vocab) {
  std::vector<std::uint8_t> flags(tokens.size(), 0);
  Token prev = initial_token(key, vocab);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const GreenMask mask = partition(key, prev, gamma, vocab);
    flags[i] = mask.green(tokens[i]) ? 1 : 0;
    prev = tokens[i];
  }
  return flags;
}

// First min(n, indices.size()) entries of a seeded shuffle.
std::vector<std::size_t> sample_positions(std::vector<std::size_t> indices,
                                          std::size_t n, Mix64Stream& rng) {
  for (std::size_t i = 0; i + 1 < indices.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(indices.size() - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(std::min(n, indices.size()));
  return indices;
}

Token red_token_for(Token predecessor, std::uint64_t key, double gamma,
                    const Vocabulary& vocab, Mix64Stream& rng) {
  const GreenMask mask = partition(key, predecessor, gamma, vocab);
  std::vector<Token> reds;
  reds.reserve(static_cast<std::size_t>(vocab.size - mask.green_count));
  for (Token k = 0; k < vocab.size; ++k) {
    if (!mask.green(k)) reds.push_back(k);
  }
  if (reds.empty()) {
    return static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(vocab.size)));
  }
  return reds[static_cast<std::size_t>(rng.next_below(reds.size()))];
}

}  // namespace

std::string to_string(AttackMode mode) {
  return mode == AttackMode::random ? "random" : "worst_case";
}

AttackMode attack_mode_from_string(const std::string& name) {
  if (name == "random") return AttackMode::random;
  if (name == "worst_case") return AttackMode::worst_case;
  throw std::invalid_argument("unknown attack mode: " + name);
}

std::vector<Token> delete_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                 std::uint64_t key, double gamma,
                                 const Vocabulary& vocab) {
  const std::size_t t = tokens.size();
  const std::size_t m = attack_budget(t, spec.rate);
  if (m >= t) throw std::invalid_argument("deletion would empty the sequence");
  if (m == 0) return {tokens.begin(), tokens.end()};

  std::vector<std::uint8_t> drop(t, 0);
  if (spec.mode == AttackMode::random) {
    Mix64Stream rng(spec.seed);
    std::vector<std::size_t> all(t);
    std::iota(all.begin(), all.end(), 0);
    for (const std::size_t i : sample_positions(std::move(all), m, rng)) drop[i] = 1;
  } else {
    // Remove the contiguous window with the most recomputed green flags
    // (earliest on ties); only the window's successor gets re-keyed.
    const auto flags = recomputed_flags(tokens, key, gamma, vocab);
    std::size_t window_greens = 0;
    for (std::size_t i = 0; i < m; ++i) window_greens += flags[i];
    std::size_t best = window_greens;
    std::size_t best_start = 0;
    for (std::size_t start = 1; start + m <= t; ++start) {
      window_greens += flags[start + m - 1];
      window_greens -= flags[start - 1];
      if (window_greens > best) {
        best = window_greens;
        best_start = start;
      }
    }
    for (std::size_t i = best_start; i < best_start + m; ++i) drop[i] = 1;
  }

  std::vector<Token> out;
  out.reserve(t - m);
  for (std::size_t i = 0; i < t; ++i) {
    if (!drop[i]) out.push_back(tokens[i]);
  }
  return out;
}

std::vector<Token> insert_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                 std::uint64_t key, double gamma,
                                 const Vocabulary& vocab) {
  const std::size_t t = tokens.size();
  const std::size_t m = attack_budget(t, spec.rate);
  std::vector<Token> out;
  out.reserve(t + m);
  if (m == 0) return {tokens.begin(), tokens.end()};

  Mix64Stream rng(spec.seed);
  // Gaps are drawn in the original index space and applied left to right, so
  // every inserted token sees its final predecessor when its value is picked
  // (worst_case needs that to stay red under recount).
  std::vector<std::size_t> gaps(m);
  for (std::size_t i = 0; i < m; ++i) {
    gaps[i] = static_cast<std::size_t>(rng.next_below(t + 1));
  }
  std::stable_sort(gaps.begin(), gaps.end());

  std::size_t g = 0;
  for (std::size_t i = 0; i <= t; ++i) {
    while (g < m && gaps[g] == i) {
      Token inserted = 0;
      if (spec.mode == AttackMode::random) {
        inserted = static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(vocab.size)));
      } else {
        const Token predecessor = out.empty() ? initial_token(key, vocab) : out.back();
        inserted = red_token_for(predecessor, key, gamma, vocab, rng);
      }
      out.push_back(inserted);
      ++g;
    }
    if (i < t) out.push_back(tokens[i]);
  }
  return out;
}

std::vector<Token> substitute_attack(std::span<const Token> tokens,
                                     const AttackSpec& spec, std::uint64_t key,
                                     double gamma, const Vocabulary& vocab) {
  const std::size_t t = tokens.size();
  const std::size_t m = attack_budget(t, spec.rate);
  std::vector<Token> out(tokens.begin(), tokens.end());
  if (m == 0) return out;
  Mix64Stream rng(spec.seed);

  std::vector<std::size_t> targets;
  if (spec.mode == AttackMode::random) {
    std::vector<std::size_t> all(t);
    std::iota(all.begin(), all.end(), 0);
    targets = sample_positions(std::move(all), m, rng);
  } else {
    const auto flags = recomputed_flags(tokens, key, gamma, vocab);
    std::vector<std::size_t> greens;
    std::vector<std::size_t> reds;
    for (std::size_t i = 0; i < t; ++i) {
      (flags[i] ? greens : reds).push_back(i);
    }
    targets = sample_positions(std::move(greens), m, rng);
    if (targets.size() < m) {
      const auto fill = sample_positions(std::move(reds), m - targets.size(), rng);
      targets.insert(targets.end(), fill.begin(), fill.end());
    }
  }

  // Replacement values are assigned left to right so each substituted token
  // sees its final predecessor (a red pick must stay red under recount).
  std::sort(targets.begin(), targets.end());
  for (const std::size_t pos : targets) {
    if (spec.mode == AttackMode::random) {
      out[pos] = static_cast<Token>(rng.next_below(static_cast<std::uint64_t>(vocab.size)));
    } else {
      const Token predecessor = pos == 0 ? initial_token(key, vocab) : out[pos - 1];
      out[pos] = red_token_for(predecessor, key, gamma, vocab, rng);
    }
  }
  return out;
}

std::vector<Token> apply_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                std::uint64_t key, double gamma,
                                const Vocabulary& vocab) {
  switch (spec.kind) {
    case AttackKind::deletion: return delete_attack(tokens, spec, key, gamma, vocab);
    case AttackKind::insertion: return insert_attack(tokens, spec, key, gamma, vocab);
    case AttackKind::substitution: return substitute_attack(tokens, spec, key, gamma, vocab);
  }
  throw std::invalid_argument("unknown attack kind");
}

}  // namespace wmlab
