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
#include <random>
#include <string>
#include <vector>

#include "groupseg/autodiff.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

enum class Activation { kNone, kRelu };

struct DenseLayer {
  Tensor weight;  // in × out
  Tensor bias;    // 1 × out
  Activation activation = Activation::kRelu;

  std::size_t in_width() const { return weight.rows(); }
  std::size_t out_width() const { return weight.cols(); }
};

using Mlp = std::vector<DenseLayer>;

/// He-uniform weights, zero biases. `widths` lists input width then each
/// layer's output width; all layers get `hidden` except the last, which gets
/// `last`.
Mlp make_mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation last, std::mt19937_64& rng,
             double last_gain = 1.0);

/// Affine-then-activation composition. Dimensions are checked for the whole
/// chain before anything is recorded.
Var mlp_forward(Var x, Mlp& layers);

void set_requires_grad(Mlp& layers, bool on);
std::vector<Tensor*> parameters(Mlp& layers);

}  // namespace groupseg
