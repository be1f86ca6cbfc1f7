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

#include <cstddef>
#include <cstdint>

#include "groupseg/autodiff.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

/// Thin SVD M = U·diag(S)·Vᵀ with r = min(m, n); U is m×r, V is n×r and S
/// holds r non-increasing non-negative values.
struct SvdResult {
  Tensor u;
  std::vector<double> s;
  Tensor v;
};

/// One-sided Jacobi SVD. Throws ValidationError on non-finite input and
/// ConvergenceError if the sweeps do not converge.
SvdResult svd(const Tensor& m);

/// σ₂ of M as a differentiable scalar. Backward adds u₂·v₂ᵀ to M's gradient.
/// Matrices with fewer than two rows or columns yield 0 with no gradient.
Var second_singular_value(Var m);

/// Plain value of σ₂ (0 when min(m, n) < 2).
double second_singular_value(const Tensor& m);

/// Number of σ₂ evaluations whose neighbouring singular-value gaps were
/// below 1e-9, i.e. where the gradient is a subgradient choice.
std::uint64_t degenerate_sigma2_count();
void reset_degenerate_sigma2_count();

}  // namespace groupseg
