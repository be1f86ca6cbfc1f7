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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace groupseg {

using Vec3 = std::array<double, 3>;

inline constexpr std::size_t kMinCloudPoints = 8;

/// Ordered point set of one shape, normalized to the unit ball around its
/// centroid. Construct through make_cloud() to enforce that.
struct PointCloud {
  std::string id;
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
};

/// normalized = (raw − centroid) / scale
struct NormalizeTransform {
  Vec3 centroid{0.0, 0.0, 0.0};
  double scale = 1.0;
};

/// Moves the centroid to the origin and scales the farthest point to radius 1.
NormalizeTransform normalize_points(std::vector<Vec3>& points);

/// Validates (≥ 8 finite points, not all coincident) and normalizes.
PointCloud make_cloud(std::string id, std::vector<Vec3> raw_points, NormalizeTransform* applied = nullptr);

struct LoadedCloud {
  PointCloud cloud;
  NormalizeTransform transform;
};

/// Whitespace-separated "x y z" per non-empty line; '#' starts a comment.
LoadedCloud load_pointcloud(const std::filesystem::path& path, std::string id = {});
void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path);

struct BinaryMask {
  std::vector<std::uint8_t> flags;

  std::size_t size() const { return flags.size(); }
  bool operator[](std::size_t i) const { return flags[i] != 0; }
  std::size_t foreground_count() const;
  std::vector<std::size_t> foreground() const;
  std::vector<std::size_t> background() const;
  bool operator==(const BinaryMask&) const = default;
};

struct KWayLabeling {
  std::vector<int> labels;
  int k_bound = 0;

  std::size_t size() const { return labels.size(); }
  /// Sorted distinct labels that occur at least once.
  std::vector<int> labels_used() const;
  /// Throws ValidationError unless every label is in [0, k_bound).
  void validate() const;
  bool operator==(const KWayLabeling&) const = default;
};

BinaryMask mask_for_label(const KWayLabeling& labeling, int label);

void save_labeling(const KWayLabeling& labeling, const std::filesystem::path& path);
/// Reads one non-negative integer per line. k_bound defaults to max + 1.
KWayLabeling load_labeling(const std::filesystem::path& path, std::optional<int> k_bound = std::nullopt);
/// Throws ValidationError if the labeling is not index-aligned with the cloud.
void check_aligned(const PointCloud& cloud, const KWayLabeling& labeling);

/// Test set T = {S_1..S_N}; ground truth, when present, is for evaluation only.
struct ShapeSet {
  std::vector<PointCloud> shapes;
  std::vector<std::optional<KWayLabeling>> ground_truth;

  std::size_t size() const { return shapes.size(); }
  void validate() const;
};

double squared_distance(const Vec3& a, const Vec3& b);

}  // namespace groupseg
