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

#include "groupseg/adam.hpp"

#include <cmath>

#include "groupseg/error.hpp"

namespace groupseg {

AdamState::AdamState(std::size_t size, AdamConfig cfg)
    : first_moment(size, 0.0), second_moment(size, 0.0), config(cfg) {
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0 && cfg.epsilon > 0.0)) {
    throw ValidationError("adam: require 0 < beta1, beta2 < 1 and epsilon > 0");
  }
}

void adam_step(Tensor& params, AdamState& state) {
  if (!params.has_grad()) throw ValidationError("adam_step: parameter has no gradient");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ValidationError("adam_step: state sized for " + std::to_string(state.first_moment.size()) +
                          " values, parameter has " + std::to_string(params.size()));
  }
  const auto& cfg = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double step = cfg.learning_rate * std::sqrt(1.0 - std::pow(cfg.beta2, t)) / (1.0 - std::pow(cfg.beta1, t));
  auto g = params.grad();
  auto p = params.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[i] * g[i];
    p[i] -= step * m / (std::sqrt(v) + cfg.epsilon);
  }
  params.clear_grad();
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, AdamConfig config) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (Tensor* p : params_) states_.emplace_back(p->size(), config);
}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i]->ensure_grad();
    adam_step(*params_[i], states_[i]);
  }
  ++steps_;
}

void AdamOptimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("adam: learning rate must be positive");
  for (auto& s : states_) s.config.learning_rate = lr;
}

void AdamOptimizer::zero_grad() {
  for (Tensor* p : params_) p->clear_grad();
}

}  // namespace groupseg
