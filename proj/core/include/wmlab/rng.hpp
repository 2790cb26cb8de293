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

#ifndef WMLAB_RNG_HPP_
#define WMLAB_RNG_HPP_

#include <cstdint>

namespace wmlab {

// Avalanche mixer (murmur3 finalizer constants). Bijective on 64-bit
// integers. Generator and detector both derive vocabulary partitions from
// it, so the exact constant sequence is part of the wire contract.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

// Maps the top 53 bits into (0, 1), clamped to [2^-53, 1 - 2^-53] so that
// log(u) and log(1 - u) stay finite.
double to_unit(std::uint64_t x) noexcept;

// Counter-based uniform stream. The value at index i is a pure function of
// (seed, i): sequences are seekable, independent across seeds, and identical
// across platforms.
class Mix64Stream {
 public:
  explicit Mix64Stream(std::uint64_t seed) noexcept : base_(mix64(seed)) {}

  std::uint64_t next_u64() noexcept { return mix64(base_ ^ mix64(++counter_)); }
  double next_unit() noexcept { return to_unit(next_u64()); }

  // Uniform integer in [0, n) via 128-bit multiply. The residual bias is
  // O(n / 2^64), irrelevant at vocabulary scale.
  std::uint64_t next_below(std::uint64_t n) noexcept;

  double next_normal() noexcept;
  double next_gamma(double shape) noexcept;
  double next_beta(double a, double b) noexcept;

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace wmlab

#endif  // WMLAB_RNG_HPP_
