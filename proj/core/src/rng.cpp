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

#include "wmlab/rng.hpp"

#include <cmath>

namespace wmlab {

double to_unit(std::uint64_t x) noexcept {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  double u = static_cast<double>(x >> 11) * kScale;
  if (u < kScale) u = kScale;
  const double hi = 1.0 - kScale;
  if (u > hi) u = hi;
  return u;
}

std::uint64_t Mix64Stream::next_below(std::uint64_t n) noexcept {
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::uint64_t>(wide >> 64);
}

double Mix64Stream::next_normal() noexcept {
  const double u1 = next_unit();
  const double u2 = next_unit();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Marsaglia-Tsang squeeze method; shape < 1 handled by the boost identity
// gamma(a) = gamma(a + 1) * U^(1/a).
double Mix64Stream::next_gamma(double shape) noexcept {
  if (shape < 1.0) {
    const double u = next_unit();
    return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = next_unit();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Mix64Stream::next_beta(double a, double b) noexcept {
  const double x = next_gamma(a);
  const double y = next_gamma(b);
  return x / (x + y);
}

}  // namespace wmlab
