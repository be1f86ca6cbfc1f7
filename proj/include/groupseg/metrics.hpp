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
#include <span>
#include <vector>

#include "groupseg/pointcloud.hpp"

namespace groupseg {

/// Rand Index in the "lower is better" convention:
/// score = 1 − pairs_agreeing / C(n, 2).
struct RandIndexReport {
  double score = 0.0;
  std::size_t n_points = 0;
  std::uint64_t pairs_agreeing = 0;
  std::uint64_t pairs_total = 0;
};

/// Contingency-count implementation, O(n + L_pred·L_gt).
RandIndexReport rand_index(std::span<const int> pred, std::span<const int> gt);
RandIndexReport rand_index(const KWayLabeling& pred, const KWayLabeling& gt);

/// Maximum-weight assignment on a rectangular matrix (rows → columns).
/// Returns, per row, the assigned column or −1 when rows outnumber columns.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

/// Best bijection from predicted to ground-truth labels by point overlap.
/// mapping[p] is the ground-truth label for predicted label p, or −1.
struct LabelMapping {
  std::vector<int> mapping;
  std::size_t matched_points = 0;
  double accuracy = 0.0;  // matched_points / n
};
LabelMapping best_label_mapping(std::span<const int> pred, std::span<const int> gt);

}  // namespace groupseg
