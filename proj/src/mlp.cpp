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

#include "groupseg/mlp.hpp"

#include <cmath>

#include "groupseg/error.hpp"

namespace groupseg {

Mlp make_mlp(const std::vector<std::size_t>& widths, Activation hidden, Activation last, std::mt19937_64& rng,
             double last_gain) {
  if (widths.size() < 2) throw ValidationError("make_mlp: need at least an input and an output width");
  Mlp layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t in = widths[l], out = widths[l + 1];
    const bool is_last = l + 2 == widths.size();
    const double gain = is_last ? last_gain : 1.0;
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Tensor::matrix(in, out), Tensor::matrix(1, out), is_last ? last : hidden};
    for (auto& w : layer.weight.values()) w = dist(rng);
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    layers.push_back(std::move(layer));
  }
  return layers;
}

Var mlp_forward(Var x, Mlp& layers) {
  std::size_t width = x.value().rank() == 2 ? x.cols() : 0;
  if (width == 0) throw ValidationError("mlp_forward: input must be a non-empty matrix");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.rank() != 2 || layer.in_width() != width || layer.bias.size() != layer.out_width()) {
      throw ValidationError("mlp_forward: layer " + std::to_string(l) + " expects width " +
                            std::to_string(layer.in_width()) + ", got " + std::to_string(width));
    }
    width = layer.out_width();
  }
  Tape& tape = *x.tape;
  Var h = x;
  for (auto& layer : layers) {
    h = linear(h, tape.parameter(layer.weight), tape.parameter(layer.bias));
    if (layer.activation == Activation::kRelu) h = relu(h);
  }
  return h;
}

void set_requires_grad(Mlp& layers, bool on) {
  for (auto& l : layers) {
    l.weight.set_requires_grad(on);
    l.bias.set_requires_grad(on);
  }
}

std::vector<Tensor*> parameters(Mlp& layers) {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

}  // namespace groupseg
