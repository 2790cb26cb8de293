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

#ifndef WMLAB_STATS_HPP_
#define WMLAB_STATS_HPP_

#include <vector>

namespace wmlab {

double log_choose(int n, int k);

// Exact upper tail P(S >= count) for S ~ Binomial(n, p), summed from
// log-binomial terms.
double binom_tail_geq(int count, int n, double p);

// Regularized upper incomplete gamma Q(a, x): series below a + 1, Lentz
// continued fraction above, relative tolerance 1e-14.
double upper_gamma_q(double a, double x);

double normal_cdf(double z);

// Kolmogorov-Smirnov distance of a sample against Uniform(0, 1).
double ks_statistic_uniform(std::vector<double> sample);

}  // namespace wmlab

#endif  // WMLAB_STATS_HPP_
