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

#include "wmlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmlab {

double log_choose(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("k outside [0, n]");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binom_tail_geq(int count, int n, double p) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("p outside [0, 1]");
  if (count <= 0) return 1.0;
  if (count > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  // Terms beyond the mode shrink monotonically; summing smallest-first keeps
  // the accumulation accurate.
  long double sum = 0.0L;
  for (int k = n; k >= count; --k) {
    sum += std::exp(log_choose(n, k) + k * lp + (n - k) * lq);
  }
  return std::min(1.0, static_cast<double>(sum));
}

namespace {

constexpr double kRelTol = 1e-14;
constexpr int kMaxIter = 10000;

// Lower regularized incomplete gamma via its power series.
double lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int i = 1; i < kMaxIter; ++i) {
    term *= x / (a + i);
    sum += term;
    if (term < sum * kRelTol) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized incomplete gamma via the Lentz continued fraction.
double upper_gamma_cf(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kRelTol) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double upper_gamma_q(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("shape must be positive");
  if (x < 0.0) throw std::invalid_argument("negative argument");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - lower_gamma_series(a, x);
  return upper_gamma_cf(a, x);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double ks_statistic_uniform(std::vector<double> sample) {
  if (sample.empty()) throw std::invalid_argument("empty sample");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(sample[i] - lo, hi - sample[i]));
  }
  return d;
}

}  // namespace wmlab
