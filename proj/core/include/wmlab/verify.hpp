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

#ifndef WMLAB_VERIFY_HPP_
#define WMLAB_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace wmlab {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20260810;
  // Test hook: perturbs the closed-form gain before it is checked against
  // the brute-force oracle, to prove the suite notices a corrupted constant.
  double dg_reference_perturbation = 0.0;
};

// Runs the named invariant checks of every module; all pure computation, no
// file output.
std::vector<PropertyResult> run_verification(const VerifyOptions& options = {});

}  // namespace wmlab

#endif  // WMLAB_VERIFY_HPP_
