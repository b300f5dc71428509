// Copyright 2026 The NFSIP Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Finite-difference checks of every analytic loss gradient.
//
// Each draw samples fresh networks (including layer-norm gains and offsets)
// and a fresh batch, then compares Backward against central differences of
// a loss evaluator that holds the same quantities constant as the analytic
// gradient does. Draws with a ReLU input or a return-minus-value within
// `kink_margin` of zero are redrawn, since differences across a kink are
// not derivatives.

#ifndef NFSIP_GRADCHECK_H_
#define NFSIP_GRADCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

namespace nfsip::gradcheck {

struct GradCheckConfig {
  int draws = 20;
  std::uint64_t seed = 7;
  int input_size = 8;
  std::vector<int> hidden_sizes = {32, 32};
  int num_actions = 4;
  int batch_size = 8;
  double step = 1e-5;
  double kink_margin = 1e-3;
  double tolerance = 1e-4;
};

struct LossCheck {
  std::string name;
  double max_relative_error = 0.0;
  int draws = 0;
  int redraws = 0;
  bool passed = false;
};

// One entry per loss: q, policy, sil_q, sil_policy, acsil.
std::vector<LossCheck> RunGradientChecks(const GradCheckConfig& config);

}  // namespace nfsip::gradcheck

#endif  // NFSIP_GRADCHECK_H_
