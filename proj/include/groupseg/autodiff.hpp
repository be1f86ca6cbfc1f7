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
#include <functional>
#include <span>
#include <vector>

#include "groupseg/tensor.hpp"

namespace groupseg {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape. Every primitive appends one node holding its output
/// value and a closure that pushes the output gradient onto its inputs.
/// Nodes are only ever appended, so node order is a topological order.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to an external parameter. If the parameter requires grad,
  /// backward() accumulates into its grad buffer.
  Var parameter(Tensor& param);
  Var record(Tensor value, std::vector<int> inputs, Backward backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node, allocated on first use.
  std::span<double> grad(int id);
  std::span<const double> grad_or_empty(int id) const { return nodes_[id].grad; }

  /// Seeds d(root)/d(root) = 1 and propagates to every node that needs it.
  /// Root must hold a single value.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    Backward backward;
    DoubleBuffer grad;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// Primitive operations. All matrices are rank-2; biases and per-row vectors
// are 1×c and n×1 respectively.

Var matmul(Var a, Var b);
/// x·W + b with x n×i, W i×o, b 1×o.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// x (n×c) plus a 1×c row broadcast over rows.
Var add_row(Var x, Var row);
/// x (n×c) with every row i multiplied by col[i] (col n×1).
Var mul_col(Var x, Var col);
Var relu(Var x);
Var softmax_rows(Var x);
/// Mean over rows of -log(max(p[r, target[r]], 1e-12)).
Var nll_loss(Var probabilities, std::span<const int> targets);
Var sum(Var x);
Var mean(Var x);
/// Column j as an n×1 matrix.
Var column(Var x, std::size_t j);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var x, std::span<const std::size_t> indices);
/// Column-wise max over each row segment [offsets[s], offsets[s+1]).
/// Gradient goes to the first maximal row.
Var segment_max(Var x, std::span<const std::size_t> offsets);
/// Column-wise max over the rows x[indices[r]] for r in each segment
/// [offsets[s], offsets[s+1]); equivalent to segment_max(gather_rows(x, indices)).
Var gather_segment_max(Var x, std::span<const std::size_t> indices, std::span<const std::size_t> offsets);

struct PointwiseLayer {
  Var weight;  // in × out
  Var bias;    // 1 × out
  bool relu = true;
};

/// Applies the same MLP to every row of `input`, then takes the column-wise
/// max over each row segment. Fused: activations are recomputed in chunks
/// during backward instead of being stored.
Var pointwise_mlp_max(Var input, const std::vector<PointwiseLayer>& layers, std::span<const std::size_t> offsets);

/// Column-wise max over all rows (1×c).
Var col_max(Var x);
/// Row-wise max (n×1).
Var row_max(Var x);
/// (wᵀx) / Σw for x n×c and w n×1; result 1×c.
Var weighted_mean_rows(Var x, Var w);
Var l2_normalize_rows(Var x);
/// Forward: 1 where x > threshold else 0. Backward: identity.
Var straight_through_threshold(Var x, double threshold);

}  // namespace groupseg
