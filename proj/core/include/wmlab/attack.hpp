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
// Token-sequence attacks for robustness experiments. Random mode models a
// key-less adversary; worst_case gives the adversary the detection key.

#ifndef WMLAB_ATTACK_HPP_
#define WMLAB_ATTACK_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "wmlab/detect.hpp"
#include "wmlab/lm.hpp"

namespace wmlab {

enum class AttackMode { random, worst_case };

std::string to_string(AttackMode mode);
AttackMode attack_mode_from_string(const std::string& name);

struct AttackSpec {
  AttackKind kind = AttackKind::deletion;
  double rate = 0.0;  // in [0, 1)
  AttackMode mode = AttackMode::random;
  std::uint64_t seed = 0;
};

// Removes floor(rate * T) tokens. Random mode drops uniformly chosen
// positions; worst_case drops the contiguous window holding the most
// recomputed green flags (the adversary of the deletion bound).
std::vector<Token> delete_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                 std::uint64_t key, double gamma,
                                 const Vocabulary& vocab);

// Inserts floor(rate * T) tokens. Random mode uses uniform positions and
// uniform tokens; worst_case greedily picks a token that is red under the
// mask keyed by its predecessor.
std::vector<Token> insert_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                 std::uint64_t key, double gamma,
                                 const Vocabulary& vocab);

// Replaces floor(rate * T) tokens in place. Random mode picks uniform
// positions and tokens; worst_case converts green positions to tokens red
// under their predecessor's mask.
std::vector<Token> substitute_attack(std::span<const Token> tokens,
                                     const AttackSpec& spec, std::uint64_t key,
                                     double gamma, const Vocabulary& vocab);

std::vector<Token> apply_attack(std::span<const Token> tokens, const AttackSpec& spec,
                                std::uint64_t key, double gamma,
                                const Vocabulary& vocab);

}  // namespace wmlab

#endif  // WMLAB_ATTACK_HPP_
