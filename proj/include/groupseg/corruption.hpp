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

#include "groupseg/pointcloud.hpp"

namespace groupseg {

struct CorruptionSpec {
  double insert_rate = 0.0;  // fraction of background flipped to foreground
  double delete_rate = 0.0;  // fraction of foreground flipped to background
  std::uint64_t seed = 0;

  void validate() const;
};

/// Background points within this distance of the foreground's bounding box
/// are inserted first.
inline constexpr double kInsertionVicinity = 0.15;

/// Flips ⌊delete_rate·|F|⌋ foreground points and ⌊insert_rate·|B|⌋ background
/// points, both chosen from the input mask. Deterministic in spec.seed.
BinaryMask corrupt_mask(const PointCloud& cloud, const BinaryMask& mask, const CorruptionSpec& spec);

}  // namespace groupseg
