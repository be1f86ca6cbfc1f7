// Copyright (c) 2026 The groupseg Authors
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

#pragma once

#include <cstdint>
#include <vector>

#include "groupseg/tensor.hpp"

namespace groupseg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg);
};

/// One bias-corrected Adam update (step size lr·√(1−β₂ᵗ)/(1−β₁ᵗ) applied to
/// m/(√v + ε)). Clears the parameter's gradient afterwards.
void adam_step(Tensor& params, AdamState& state);

/// Adam over a fixed list of parameter tensors.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, AdamConfig config);

  /// Updates every parameter that holds a gradient; a parameter without one
  /// is treated as having a zero gradient.
  void step();
  void zero_grad();
  std::uint64_t steps() const { return steps_; }
  void set_learning_rate(double lr);

 private:
  std::vector<Tensor*> params_;
  std::vector<AdamState> states_;
  std::uint64_t steps_ = 0;
};

}  // namespace groupseg
