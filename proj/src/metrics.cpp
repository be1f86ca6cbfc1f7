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

#include "groupseg/metrics.hpp"

#include <algorithm>
#include <limits>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

std::uint64_t pairs(std::uint64_t c) { return c * (c - (c > 0 ? 1 : 0)) / 2; }

void check_labels(std::span<const int> pred, std::span<const int> gt, const char* op) {
  if (pred.size() != gt.size())
    throw ValidationError(std::string(op) + ": length mismatch (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(gt.size()) + ")");
  auto negative = [](int v) { return v < 0; };
  if (std::any_of(pred.begin(), pred.end(), negative) || std::any_of(gt.begin(), gt.end(), negative))
    throw ValidationError(std::string(op) + ": negative label");
}

// Labels renumbered densely in order of first appearance.
std::vector<int> compact(std::span<const int> labels, std::size_t& count) {
  std::vector<int> remap;
  std::vector<int> out(labels.size());
  count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    if (l >= remap.size()) remap.resize(l + 1, -1);
    if (remap[l] < 0) remap[l] = static_cast<int>(count++);
    out[i] = remap[l];
  }
  return out;
}

}  // namespace

RandIndexReport rand_index(std::span<const int> pred, std::span<const int> gt) {
  check_labels(pred, gt, "rand_index");
  if (pred.size() < 2) throw ValidationError("rand_index: need at least 2 points");
  std::size_t lp = 0, lg = 0;
  const auto p = compact(pred, lp);
  const auto g = compact(gt, lg);
  std::vector<std::uint64_t> table(lp * lg, 0), row(lp, 0), col(lg, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++table[static_cast<std::size_t>(p[i]) * lg + static_cast<std::size_t>(g[i])];
    ++row[static_cast<std::size_t>(p[i])];
    ++col[static_cast<std::size_t>(g[i])];
  }
  std::uint64_t same_pred = 0, same_gt = 0, same_both = 0;
  for (auto c : row) same_pred += pairs(c);
  for (auto c : col) same_gt += pairs(c);
  for (auto c : table) same_both += pairs(c);
  RandIndexReport r;
  r.n_points = pred.size();
  r.pairs_total = pairs(pred.size());
  // Disagreeing pairs are together on exactly one side.
  const std::uint64_t disagree = same_pred + same_gt - 2 * same_both;
  r.pairs_agreeing = r.pairs_total - disagree;
  r.score = static_cast<double>(disagree) / static_cast<double>(r.pairs_total);
  return r;
}

RandIndexReport rand_index(const KWayLabeling& pred, const KWayLabeling& gt) {
  return rand_index(std::span<const int>(pred.labels), std::span<const int>(gt.labels));
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows == 0 ? 0 : weight[0].size();
  for (const auto& r : weight)
    if (r.size() != cols) throw ValidationError("max_weight_assignment: ragged matrix");
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  double top = 0.0;
  for (const auto& r : weight)
    for (double v : r) top = std::max(top, v);
  // Hungarian algorithm (potentials form) minimizing top − weight on a
  // zero-padded square matrix; 1-based with a virtual column 0.
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? top - weight[i][j] : top;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = match[j];
    if (i >= 1 && i <= rows && j <= cols) out[i - 1] = static_cast<int>(j - 1);
  }
  return out;
}

LabelMapping best_label_mapping(std::span<const int> pred, std::span<const int> gt) {
  check_labels(pred, gt, "best_label_mapping");
  LabelMapping m;
  if (pred.empty()) return m;
  const auto lp = static_cast<std::size_t>(*std::max_element(pred.begin(), pred.end())) + 1;
  const auto lg = static_cast<std::size_t>(*std::max_element(gt.begin(), gt.end())) + 1;
  std::vector<std::vector<double>> overlap(lp, std::vector<double>(lg, 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i)
    overlap[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(gt[i])] += 1.0;
  m.mapping = max_weight_assignment(overlap);
  for (std::size_t p = 0; p < lp; ++p) {
    if (m.mapping[p] >= 0) m.matched_points += static_cast<std::size_t>(overlap[p][static_cast<std::size_t>(m.mapping[p])]);
  }
  m.accuracy = static_cast<double>(m.matched_points) / static_cast<double>(pred.size());
  return m;
}

}  // namespace groupseg
