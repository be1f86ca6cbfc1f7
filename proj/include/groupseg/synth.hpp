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
#include <string>
#include <vector>

#include "groupseg/pointcloud.hpp"

namespace groupseg {

enum class ShapeFamily { kTwoBox, kChairLike, kTableLike, kLampLike };

ShapeFamily parse_family(const std::string& name);
std::string family_name(ShapeFamily family);

struct SynthSpec {
  ShapeFamily family = ShapeFamily::kTwoBox;
  std::size_t n_points = 512;
  bool with_arms = false;
  double jitter = 0.0;
  std::uint64_t seed = 0;
  std::string id;

  void validate() const;
};

/// Upper bound on ground-truth labels for a family (chair: back, seat, legs, arms).
int family_k_bound(ShapeFamily family);
/// Human-readable group names, for reports only.
std::vector<std::string> family_label_names(ShapeFamily family);

namespace chair_labels {
inline constexpr int kBack = 0;
inline constexpr int kSeat = 1;
inline constexpr int kLegs = 2;
inline constexpr int kArms = 3;
}  // namespace chair_labels

struct SynthShape {
  PointCloud cloud;
  KWayLabeling ground_truth;
};

/// Box-primitive shape sampled uniformly by surface area; the ground-truth
/// label of a point is the primitive group that generated it. Deterministic
/// in the spec.
SynthShape synth_shape(const SynthSpec& spec);

}  // namespace groupseg
