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

#include "groupseg/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kDegenerateGap = 1e-9;

std::atomic<std::uint64_t> g_degenerate{0};

// Column-major working storage: column j of an m×n matrix lives at [j*m, (j+1)*m).
struct ColMajor {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;
  double* col(std::size_t j) { return a.data() + j * rows; }
  const double* col(std::size_t j) const { return a.data() + j * rows; }
};

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

// Gram–Schmidt completion of a zero column against the others.
void complete_column(ColMajor& u, std::size_t j, const std::vector<bool>& filled) {
  for (std::size_t e = 0; e < u.rows; ++e) {
    std::vector<double> cand(u.rows, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < u.cols; ++k) {
        if (k == j || !filled[k]) continue;
        const double p = dot(cand.data(), u.col(k), u.rows);
        for (std::size_t i = 0; i < u.rows; ++i) cand[i] -= p * u.col(k)[i];
      }
    }
    const double nrm = std::sqrt(dot(cand.data(), cand.data(), u.rows));
    if (nrm > 1e-6) {
      for (std::size_t i = 0; i < u.rows; ++i) u.col(j)[i] = cand[i] / nrm;
      return;
    }
  }
  throw ConvergenceError("svd: could not complete an orthonormal basis");
}

// Requires m >= n.
SvdResult jacobi_tall(const Tensor& m) {
  const std::size_t rows = m.rows(), cols = m.cols();
  ColMajor u{rows, cols, std::vector<double>(rows * cols)};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) u.a[j * rows + i] = m(i, j);
  ColMajor v{cols, cols, std::vector<double>(cols * cols, 0.0)};
  for (std::size_t j = 0; j < cols; ++j) v.a[j * cols + j] = 1.0;

  constexpr double kTol = 1e-14;
  // Columns this small are rounding noise of a rank-deficient input; they
  // can never pass the relative orthogonality test, so treat them as zero.
  double frob2 = 0.0;
  for (double x : u.a) frob2 += x * x;
  const double noise2 = 1e-26 * frob2;
  bool converged = cols < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double* up = u.col(p);
        double* uq = u.col(q);
        const double alpha = dot(up, up, rows);
        const double beta = dot(uq, uq, rows);
        const double gamma = dot(up, uq, rows);
        if (alpha <= noise2 || beta <= noise2) continue;
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double x = up[i], y = uq[i];
          up[i] = c * x - s * y;
          uq[i] = s * x + c * y;
        }
        double* vp = v.col(p);
        double* vq = v.col(q);
        for (std::size_t i = 0; i < cols; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
  }
  if (!converged) throw ConvergenceError("svd: Jacobi sweeps did not converge");

  std::vector<double> sigma(cols);
  for (std::size_t j = 0; j < cols; ++j) sigma[j] = std::sqrt(dot(u.col(j), u.col(j), rows));
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double smax = cols ? sigma[order[0]] : 0.0;
  const double zero_tol = std::max(smax, 1.0) * 1e-13 * static_cast<double>(std::max(rows, cols));
  ColMajor us{rows, cols, std::vector<double>(rows * cols, 0.0)};
  std::vector<bool> filled(cols, false);
  SvdResult out;
  out.s.resize(cols);
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t j = order[k];
    out.s[k] = sigma[j];
    if (sigma[j] > zero_tol) {
      for (std::size_t i = 0; i < rows; ++i) us.col(k)[i] = u.col(j)[i] / sigma[j];
      filled[k] = true;
    }
  }
  for (std::size_t k = 0; k < cols; ++k) {
    if (!filled[k]) {
      complete_column(us, k, filled);
      filled[k] = true;
    }
  }
  out.u = Tensor::matrix(rows, cols);
  out.v = Tensor::matrix(cols, cols);
  for (std::size_t k = 0; k < cols; ++k) {
    for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = us.col(k)[i];
    const std::size_t j = order[k];
    for (std::size_t i = 0; i < cols; ++i) out.v(i, k) = v.col(j)[i];
  }
  return out;
}

Tensor transpose(const Tensor& m) {
  Tensor t = Tensor::matrix(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

}  // namespace

SvdResult svd(const Tensor& m) {
  if (m.rank() != 2 || m.rows() == 0 || m.cols() == 0) {
    throw ValidationError("svd: expected a non-empty matrix, got " + shape_string(m.shape()));
  }
  if (!m.all_finite()) throw ValidationError("svd: input contains NaN or Inf");
  if (m.rows() >= m.cols()) return jacobi_tall(m);
  SvdResult t = jacobi_tall(transpose(m));
  std::swap(t.u, t.v);
  return t;
}

double second_singular_value(const Tensor& m) {
  if (m.rank() != 2 || m.rows() < 2 || m.cols() < 2) return 0.0;
  return svd(m).s[1];
}

Var second_singular_value(Var m) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || M.rows() < 2 || M.cols() < 2) {
    return m.tape->constant(Tensor::scalar(0.0));
  }
  SvdResult d = svd(M);
  const auto& s = d.s;
  if (s[0] - s[1] < kDegenerateGap || (s.size() > 2 && s[1] - s[2] < kDegenerateGap)) ++g_degenerate;
  const std::size_t rows = M.rows(), cols = M.cols();
  std::vector<double> u2(rows), v2(cols);
  for (std::size_t i = 0; i < rows; ++i) u2[i] = d.u(i, 1);
  for (std::size_t j = 0; j < cols; ++j) v2[j] = d.v(j, 1);
  const int im = m.id;
  return m.tape->record(Tensor::scalar(s[1]), {im},
                        [im, u2 = std::move(u2), v2 = std::move(v2)](Tape& tp, int self) {
                          const double g = tp.grad_or_empty(self)[0];
                          auto dm = tp.grad(im);
                          const std::size_t cols = v2.size();
                          for (std::size_t i = 0; i < u2.size(); ++i)
                            for (std::size_t j = 0; j < cols; ++j) dm[i * cols + j] += g * u2[i] * v2[j];
                        });
}

std::uint64_t degenerate_sigma2_count() { return g_degenerate.load(); }
void reset_degenerate_sigma2_count() { g_degenerate = 0; }

}  // namespace groupseg
