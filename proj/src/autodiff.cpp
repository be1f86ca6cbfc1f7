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

#include "groupseg/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

MapC as_mat(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
MapC as_mat(std::span<const double> s, std::size_t r, std::size_t c) { return MapC(s.data(), r, c); }
MapM as_mat(std::span<double> s, std::size_t r, std::size_t c) { return MapM(s.data(), r, c); }

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ValidationError("operands recorded on different tapes");
  return *a.tape;
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ValidationError(std::string(op) + ": " + detail);
}

std::string dims(const Tensor& t) { return shape_string(t.shape()); }

Tensor mat(std::size_t r, std::size_t c) { return Tensor(Shape{r, c}); }

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(Tensor& param) {
  Node n;
  n.value = param;
  n.value.clear_grad();
  n.bound = &param;
  n.needs_grad = param.requires_grad();
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::vector<int> inputs, Backward backward) {
  if (!value.all_finite()) throw RuntimeFailure("tape: operation produced a non-finite value");
  Node n;
  n.value = std::move(value);
  for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

std::span<double> Tape::grad(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ValidationError("backward: root is not on this tape");
  if (nodes_[root.id].value.size() != 1) throw ValidationError("backward: root must be a single value");
  if (!nodes_[root.id].needs_grad) return;
  grad(root.id)[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.bound != nullptr && n.bound->requires_grad()) {
      auto g = n.bound->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(), "matmul", dims(A) + " x " + dims(B));
  Tensor out = mat(A.rows(), B.cols());
  as_mat(out.values(), out.rows(), out.cols()).noalias() = as_mat(A) * as_mat(B);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    auto g = as_mat(tp.grad_or_empty(self), A.rows(), B.cols());
    if (tp.needs_grad(ia)) as_mat(tp.grad(ia), A.rows(), A.cols()).noalias() += g * as_mat(B).transpose();
    if (tp.needs_grad(ib)) as_mat(tp.grad(ib), B.rows(), B.cols()).noalias() += as_mat(A).transpose() * g;
  });
}

Var linear(Var x, Var w, Var b) {
  Tape& t = same_tape(x, w);
  same_tape(w, b);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  require(X.rank() == 2 && W.rank() == 2 && X.cols() == W.rows(), "linear", dims(X) + " x " + dims(W));
  require(B.size() == W.cols(), "linear", "bias " + dims(B) + " for weight " + dims(W));
  Tensor out = mat(X.rows(), W.cols());
  auto O = as_mat(out.values(), out.rows(), out.cols());
  O.noalias() = as_mat(X) * as_mat(W);
  O.rowwise() += as_mat(B.values(), 1, B.size()).row(0);
  const int ix = x.id, iw = w.id, ib = b.id;
  return t.record(std::move(out), {ix, iw, ib}, [ix, iw, ib](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    const Tensor& W = tp.value(iw);
    auto g = as_mat(tp.grad_or_empty(self), X.rows(), W.cols());
    if (tp.needs_grad(ix)) as_mat(tp.grad(ix), X.rows(), X.cols()).noalias() += g * as_mat(W).transpose();
    if (tp.needs_grad(iw)) as_mat(tp.grad(iw), W.rows(), W.cols()).noalias() += as_mat(X).transpose() * g;
    if (tp.needs_grad(ib)) as_mat(tp.grad(ib), 1, W.cols()) += g.colwise().sum();
  });
}

namespace {

template <typename Fwd, typename Bwd>
Var binary_elementwise(Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  Tape& t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.shape() == B.shape(), name, dims(A) + " vs " + dims(B));
  Tensor out(A.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(A[i], B[i]);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, bwd](Tape& tp, int self) {
    const Tensor& A = tp.value(ia);
    const Tensor& B = tp.value(ib);
    auto g = tp.grad_or_empty(self);
    const bool ga = tp.needs_grad(ia), gb = tp.needs_grad(ib);
    std::span<double> da = ga ? tp.grad(ia) : std::span<double>();
    std::span<double> db = gb ? tp.grad(ib) : std::span<double>();
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto [pa, pb] = bwd(A[i], B[i]);
      if (ga) da[i] += g[i] * pa;
      if (gb) db[i] += g[i] * pb;
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Var x, Fwd fwd, Deriv deriv) {
  const Tensor& X = x.value();
  Tensor out(X.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(X[i]);
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, deriv](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    const Tensor& Y = tp.value(self);
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(X[i], Y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      a, b, "add", [](double p, double q) { return p + q; },
      [](double, double) { return std::pair{1.0, 1.0}; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      a, b, "sub", [](double p, double q) { return p - q; },
      [](double, double) { return std::pair{1.0, -1.0}; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      a, b, "mul", [](double p, double q) { return p * q; },
      [](double p, double q) { return std::pair{q, p}; });
}

Var scale(Var a, double c) {
  return unary_elementwise(
      a, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary_elementwise(
      a, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var add_row(Var x, Var row) {
  Tape& t = same_tape(x, row);
  const Tensor& X = x.value();
  const Tensor& R = row.value();
  require(X.rank() == 2 && R.size() == X.cols(), "add_row", dims(X) + " + " + dims(R));
  Tensor out = X;
  as_mat(out.values(), X.rows(), X.cols()).rowwise() += as_mat(R.values(), 1, R.size()).row(0);
  const int ix = x.id, ir = row.id;
  return t.record(std::move(out), {ix, ir}, [ix, ir](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    auto g = as_mat(tp.grad_or_empty(self), X.rows(), X.cols());
    if (tp.needs_grad(ix)) as_mat(tp.grad(ix), X.rows(), X.cols()) += g;
    if (tp.needs_grad(ir)) as_mat(tp.grad(ir), 1, X.cols()) += g.colwise().sum();
  });
}

Var mul_col(Var x, Var col) {
  Tape& t = same_tape(x, col);
  const Tensor& X = x.value();
  const Tensor& C = col.value();
  require(X.rank() == 2 && C.size() == X.rows(), "mul_col", dims(X) + " * " + dims(C));
  Tensor out = X;
  const std::size_t n = X.rows(), c = X.cols();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] *= C[r];
  }
  const int ix = x.id, ic = col.id;
  return t.record(std::move(out), {ix, ic}, [ix, ic](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    const Tensor& C = tp.value(ic);
    auto g = tp.grad_or_empty(self);
    const std::size_t n = X.rows(), c = X.cols();
    if (tp.needs_grad(ix)) {
      auto dx = tp.grad(ix);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += g[r * c + j] * C[r];
    }
    if (tp.needs_grad(ic)) {
      auto dc = tp.grad(ic);
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += g[r * c + j] * X[r * c + j];
        dc[r] += acc;
      }
    }
  });
}

Var softmax_rows(Var x) {
  const Tensor& X = x.value();
  require(X.rank() == 2, "softmax_rows", dims(X));
  if (!X.all_finite()) throw ValidationError("softmax_rows: non-finite input");
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out(X.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double* in = X.data() + r * c;
    double* o = out.data() + r * c;
    const double m = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (o[j] = std::exp(in[j] - m));
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Tensor& Y = tp.value(self);
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    const std::size_t n = Y.rows(), c = Y.cols();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * Y[r * c + j];
      for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += Y[r * c + j] * (g[r * c + j] - dot);
    }
  });
}

Var nll_loss(Var probabilities, std::span<const int> targets) {
  constexpr double kFloor = 1e-12;
  const Tensor& P = probabilities.value();
  require(P.rank() == 2 && targets.size() == P.rows(), "nll_loss",
          dims(P) + " with " + std::to_string(targets.size()) + " targets");
  const std::size_t n = P.rows(), c = P.cols();
  for (int tgt : targets) {
    if (tgt < 0 || static_cast<std::size_t>(tgt) >= c) {
      throw ValidationError("nll_loss: target " + std::to_string(tgt) + " out of range [0, " + std::to_string(c) + ")");
    }
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total -= std::log(std::max(P[r * c + targets[r]], kFloor));
  std::vector<int> tg(targets.begin(), targets.end());
  const int ip = probabilities.id;
  return probabilities.tape->record(Tensor::scalar(total / static_cast<double>(n)), {ip},
                                    [ip, tg = std::move(tg)](Tape& tp, int self) {
                                      const Tensor& P = tp.value(ip);
                                      const double g = tp.grad_or_empty(self)[0];
                                      auto dp = tp.grad(ip);
                                      const std::size_t n = P.rows(), c = P.cols();
                                      for (std::size_t r = 0; r < n; ++r) {
                                        const std::size_t k = r * c + tg[r];
                                        if (P[k] > kFloor) dp[k] -= g / (P[k] * static_cast<double>(n));
                                      }
                                    });
}

Var sum(Var x) {
  const Tensor& X = x.value();
  double s = 0.0;
  for (double v : X.values()) s += v;
  const int ix = x.id;
  return x.tape->record(Tensor::scalar(s), {ix}, [ix](Tape& tp, int self) {
    const double g = tp.grad_or_empty(self)[0];
    for (auto& d : tp.grad(ix)) d += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  require(n > 0, "mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var column(Var x, std::size_t j) {
  const Tensor& X = x.value();
  require(X.rank() == 2 && j < X.cols(), "column", dims(X) + " column " + std::to_string(j));
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out = mat(n, 1);
  for (std::size_t r = 0; r < n; ++r) out[r] = X[r * c + j];
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, j](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    const std::size_t c = X.cols();
    for (std::size_t r = 0; r < X.rows(); ++r) dx[r * c + j] += g[r];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  Tape& t = *parts.front().tape;
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    require(p.value().rank() == 2 && p.rows() == n, "concat_cols", "row count mismatch " + dims(p.value()));
    ids.push_back(p.id);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = mat(n, total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& P = p.value();
    const std::size_t w = P.cols();
    for (std::size_t r = 0; r < n; ++r) std::copy_n(P.data() + r * w, w, out.data() + r * total + off);
    off += w;
  }
  return t.record(std::move(out), ids, [ids, widths, n, total](Tape& tp, int self) {
    auto g = tp.grad_or_empty(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (tp.needs_grad(ids[k])) {
        auto d = tp.grad(ids[k]);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < w; ++j) d[r * w + j] += g[r * total + off + j];
      }
      off += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  Tape& t = *parts.front().tape;
  const std::size_t c = parts.front().cols();
  std::size_t n = 0;
  std::vector<int> ids;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    require(p.value().rank() == 2 && p.cols() == c, "concat_rows", "column count mismatch " + dims(p.value()));
    ids.push_back(p.id);
    n += p.rows();
  }
  Tensor out = mat(n, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + off);
    off += p.value().size();
  }
  return t.record(std::move(out), ids, [ids](Tape& tp, int self) {
    auto g = tp.grad_or_empty(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t sz = tp.value(id).size();
      if (tp.needs_grad(id)) {
        auto d = tp.grad(id);
        for (std::size_t i = 0; i < sz; ++i) d[i] += g[off + i];
      }
      off += sz;
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> indices) {
  const Tensor& X = x.value();
  require(X.rank() == 2, "gather_rows", dims(X));
  const std::size_t c = X.cols();
  Tensor out = mat(indices.size(), c);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    require(indices[r] < X.rows(), "gather_rows", "index out of range");
    std::copy_n(X.data() + indices[r] * c, c, out.data() + r * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, idx = std::move(idx)](Tape& tp, int self) {
    const std::size_t c = tp.value(ix).cols();
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) dx[idx[r] * c + j] += g[r * c + j];
  });
}

Var segment_max(Var x, std::span<const std::size_t> offsets) {
  const Tensor& X = x.value();
  require(X.rank() == 2 && offsets.size() >= 2 && offsets.back() == X.rows(), "segment_max",
          dims(X) + " with " + std::to_string(offsets.size()) + " offsets");
  const std::size_t segs = offsets.size() - 1, c = X.cols();
  Tensor out = mat(segs, c);
  std::vector<std::size_t> arg(segs * c);
  for (std::size_t s = 0; s < segs; ++s) {
    require(offsets[s] < offsets[s + 1], "segment_max", "empty segment");
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = offsets[s];
      double bv = X[best * c + j];
      for (std::size_t r = offsets[s] + 1; r < offsets[s + 1]; ++r) {
        const double v = X[r * c + j];
        if (v > bv) {
          bv = v;
          best = r;
        }
      }
      out[s * c + j] = bv;
      arg[s * c + j] = best;
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, c, arg = std::move(arg)](Tape& tp, int self) {
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    for (std::size_t k = 0; k < arg.size(); ++k) dx[arg[k] * c + (k % c)] += g[k];
  });
}

Var gather_segment_max(Var x, std::span<const std::size_t> indices, std::span<const std::size_t> offsets) {
  const Tensor& X = x.value();
  require(X.rank() == 2 && offsets.size() >= 2 && offsets.back() == indices.size(), "gather_segment_max",
          dims(X) + " with " + std::to_string(offsets.size()) + " offsets");
  const std::size_t segs = offsets.size() - 1, c = X.cols();
  Tensor out = mat(segs, c);
  std::vector<std::size_t> arg(segs * c);
  for (std::size_t s = 0; s < segs; ++s) {
    require(offsets[s] < offsets[s + 1], "gather_segment_max", "empty segment");
    double* o = out.data() + s * c;
    std::size_t* a = arg.data() + s * c;
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
      const std::size_t src = indices[r];
      require(src < X.rows(), "gather_segment_max", "index out of range");
      const double* row = X.data() + src * c;
      const bool first = r == offsets[s];
      for (std::size_t j = 0; j < c; ++j) {
        if (first || row[j] > o[j]) {
          o[j] = row[j];
          a[j] = src;
        }
      }
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, c, arg = std::move(arg)](Tape& tp, int self) {
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    for (std::size_t k = 0; k < arg.size(); ++k) dx[arg[k] * c + (k % c)] += g[k];
  });
}

namespace {

constexpr std::size_t kChunkRows = 2048;

// Forward of a point-wise MLP over the rows of `in`; fills the
// pre-activation and activation buffers of every layer.
template <typename In>
void pointwise_forward(const In& in, const std::vector<const Tensor*>& w, const std::vector<const Tensor*>& b,
                       const std::vector<bool>& relu, std::vector<RowMat>& pre, std::vector<RowMat>& act) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    const std::size_t out = w[l]->cols();
    if (l == 0) {
      pre[l].noalias() = in * as_mat(*w[l]);
    } else {
      pre[l].noalias() = act[l - 1] * as_mat(*w[l]);
    }
    pre[l].rowwise() += as_mat(b[l]->values(), 1, out).row(0);
    act[l] = relu[l] ? RowMat(pre[l].cwiseMax(0.0)) : pre[l];
  }
}

}  // namespace

Var pointwise_mlp_max(Var input, const std::vector<PointwiseLayer>& layers, std::span<const std::size_t> offsets) {
  Tape& t = *input.tape;
  const Tensor& X = input.value();
  require(!layers.empty(), "pointwise_mlp_max", "no layers");
  require(X.rank() == 2 && offsets.size() >= 2 && offsets.back() == X.rows(), "pointwise_mlp_max",
          dims(X) + " with " + std::to_string(offsets.size()) + " offsets");
  std::size_t width = X.cols();
  std::vector<int> ids{input.id};
  std::vector<const Tensor*> w, b;
  std::vector<bool> relu_flags;
  for (const auto& l : layers) {
    same_tape(input, l.weight);
    same_tape(input, l.bias);
    require(l.weight.value().rows() == width && l.bias.value().size() == l.weight.value().cols(), "pointwise_mlp_max",
            "layer expects " + std::to_string(l.weight.value().rows()) + " inputs, got " + std::to_string(width));
    width = l.weight.value().cols();
    ids.push_back(l.weight.id);
    ids.push_back(l.bias.id);
    w.push_back(&l.weight.value());
    b.push_back(&l.bias.value());
    relu_flags.push_back(l.relu);
  }
  const std::size_t segs = offsets.size() - 1, c = width, L = layers.size();
  Tensor out = mat(segs, c);
  std::vector<std::size_t> arg(segs * c);
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  std::vector<RowMat> pre(L), act(L);
  for (std::size_t s0 = 0; s0 < segs;) {
    std::size_t s1 = s0 + 1;
    while (s1 < segs && offs[s1 + 1] - offs[s0] <= kChunkRows) ++s1;
    const std::size_t r0 = offs[s0];
    const std::size_t rows = offs[s1] - r0;
    pointwise_forward(as_mat(X.values().subspan(r0 * X.cols(), rows * X.cols()), rows, X.cols()), w, b, relu_flags,
                      pre, act);
    const RowMat& y = act[L - 1];
    for (std::size_t s = s0; s < s1; ++s) {
      require(offs[s] < offs[s + 1], "pointwise_mlp_max", "empty segment");
      double* o = out.data() + s * c;
      std::size_t* a = arg.data() + s * c;
      for (std::size_t r = offs[s]; r < offs[s + 1]; ++r) {
        const double* row = y.data() + (r - r0) * c;
        const bool first = r == offs[s];
        for (std::size_t j = 0; j < c; ++j) {
          if (first || row[j] > o[j]) {
            o[j] = row[j];
            a[j] = r;
          }
        }
      }
    }
    s0 = s1;
  }

  return t.record(std::move(out), ids, [ids, relu_flags, offs = std::move(offs), arg = std::move(arg), c](Tape& tp,
                                                                                                         int self) {
    const std::size_t L = relu_flags.size();
    const Tensor& X = tp.value(ids[0]);
    std::vector<const Tensor*> w, b;
    for (std::size_t l = 0; l < L; ++l) {
      w.push_back(&tp.value(ids[1 + 2 * l]));
      b.push_back(&tp.value(ids[2 + 2 * l]));
    }
    auto g = tp.grad_or_empty(self);
    const std::size_t segs = offs.size() - 1;
    std::vector<RowMat> pre(L), act(L), dw(L);
    std::vector<Eigen::RowVectorXd> db(L);
    for (std::size_t l = 0; l < L; ++l) {
      dw[l] = RowMat::Zero(w[l]->rows(), w[l]->cols());
      db[l] = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(w[l]->cols()));
    }
    const bool need_x = tp.needs_grad(ids[0]);
    const std::size_t in_w = X.cols();
    // Only rows that won a max receive gradient: recompute just those.
    std::vector<std::size_t> rows;
    std::vector<int> slot(X.rows(), -1);
    RowMat xin, delta;
    for (std::size_t s0 = 0; s0 < segs;) {
      std::size_t s1 = s0 + 1;
      while (s1 < segs && offs[s1 + 1] - offs[s0] <= kChunkRows) ++s1;
      rows.clear();
      for (std::size_t k = s0 * c; k < s1 * c; ++k) {
        if (g[k] != 0.0 && slot[arg[k]] < 0) {
          slot[arg[k]] = static_cast<int>(rows.size());
          rows.push_back(arg[k]);
        }
      }
      if (!rows.empty()) {
        const auto k_rows = static_cast<Eigen::Index>(rows.size());
        xin.resize(k_rows, static_cast<Eigen::Index>(in_w));
        for (Eigen::Index r = 0; r < k_rows; ++r)
          xin.row(r) = as_mat(X.values().subspan(rows[static_cast<std::size_t>(r)] * in_w, in_w), 1, in_w);
        pointwise_forward(xin, w, b, relu_flags, pre, act);
        delta = RowMat::Zero(k_rows, static_cast<Eigen::Index>(c));
        for (std::size_t k = s0 * c; k < s1 * c; ++k)
          if (g[k] != 0.0) delta(slot[arg[k]], static_cast<Eigen::Index>(k % c)) += g[k];
        for (std::size_t l = L; l-- > 0;) {
          if (relu_flags[l]) delta = (pre[l].array() > 0.0).select(delta, 0.0);
          db[l] += delta.colwise().sum();
          dw[l].noalias() += (l > 0 ? act[l - 1] : xin).transpose() * delta;
          if (l > 0 || need_x) delta = (delta * as_mat(*w[l]).transpose()).eval();
        }
        if (need_x) {
          auto dx = tp.grad(ids[0]);
          for (Eigen::Index r = 0; r < k_rows; ++r)
            as_mat(dx.subspan(rows[static_cast<std::size_t>(r)] * in_w, in_w), 1, in_w) += delta.row(r);
        }
        for (std::size_t r : rows) slot[r] = -1;
      }
      s0 = s1;
    }
    for (std::size_t l = 0; l < L; ++l) {
      if (tp.needs_grad(ids[1 + 2 * l])) as_mat(tp.grad(ids[1 + 2 * l]), w[l]->rows(), w[l]->cols()) += dw[l];
      if (tp.needs_grad(ids[2 + 2 * l])) as_mat(tp.grad(ids[2 + 2 * l]), 1, w[l]->cols()) += db[l];
    }
  });
}

Var col_max(Var x) {
  const std::size_t offsets[2] = {0, x.rows()};
  return segment_max(x, offsets);
}

Var row_max(Var x) {
  const Tensor& X = x.value();
  require(X.rank() == 2 && X.cols() > 0, "row_max", dims(X));
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out = mat(n, 1);
  std::vector<std::size_t> arg(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = X.data() + r * c;
    arg[r] = static_cast<std::size_t>(std::max_element(row, row + c) - row);
    out[r] = row[arg[r]];
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, c, arg = std::move(arg)](Tape& tp, int self) {
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    for (std::size_t r = 0; r < arg.size(); ++r) dx[r * c + arg[r]] += g[r];
  });
}

Var weighted_mean_rows(Var x, Var w) {
  Tape& t = same_tape(x, w);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  require(X.rank() == 2 && W.size() == X.rows(), "weighted_mean_rows", dims(X) + " with weights " + dims(W));
  double total = 0.0;
  for (double v : W.values()) total += v;
  if (!(total > 0.0)) throw EmptyForegroundError("weighted_mean_rows: weights sum to zero");
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out = mat(1, c);
  as_mat(out.values(), 1, c).noalias() = as_mat(W.values(), 1, n) * as_mat(X) / total;
  const int ix = x.id, iw = w.id;
  return t.record(std::move(out), {ix, iw}, [ix, iw, total](Tape& tp, int self) {
    const Tensor& X = tp.value(ix);
    const Tensor& W = tp.value(iw);
    const Tensor& Y = tp.value(self);
    const std::size_t n = X.rows(), c = X.cols();
    auto g = as_mat(tp.grad_or_empty(self), 1, c);
    if (tp.needs_grad(ix)) as_mat(tp.grad(ix), n, c).noalias() += as_mat(W.values(), n, 1) * g / total;
    if (tp.needs_grad(iw)) {
      // d/dw_q of Σ w x / Σ w = (x_q − y) / Σ w
      auto dw = tp.grad(iw);
      const double gy = (g * as_mat(Y).transpose())(0, 0);
      auto gx = (as_mat(X) * g.transpose()).eval();
      for (std::size_t q = 0; q < n; ++q) dw[q] += (gx(q, 0) - gy) / total;
    }
  });
}

Var l2_normalize_rows(Var x) {
  constexpr double kTiny = 1e-12;
  const Tensor& X = x.value();
  require(X.rank() == 2, "l2_normalize_rows", dims(X));
  const std::size_t n = X.rows(), c = X.cols();
  Tensor out(X.shape());
  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += X[r * c + j] * X[r * c + j];
    norms[r] = std::max(std::sqrt(s), kTiny);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = X[r * c + j] / norms[r];
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, norms = std::move(norms)](Tape& tp, int self) {
    const Tensor& Y = tp.value(self);
    auto g = tp.grad_or_empty(self);
    auto dx = tp.grad(ix);
    const std::size_t n = Y.rows(), c = Y.cols();
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * Y[r * c + j];
      for (std::size_t j = 0; j < c; ++j) dx[r * c + j] += (g[r * c + j] - dot * Y[r * c + j]) / norms[r];
    }
  });
}

Var straight_through_threshold(Var x, double threshold) {
  return unary_elementwise(
      x, [threshold](double v) { return v > threshold ? 1.0 : 0.0; }, [](double, double) { return 1.0; });
}

}  // namespace groupseg
