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

#include "groupseg/neighbors.hpp"

#include <algorithm>
#include <utility>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

std::vector<std::pair<double, std::size_t>> distances_from(const PointCloud& cloud, std::size_t center) {
  if (center >= cloud.size()) throw ValidationError("neighbor query: center index out of range");
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(cloud.size());
  const Vec3& c = cloud.points[center];
  for (std::size_t i = 0; i < cloud.size(); ++i) d.emplace_back(squared_distance(c, cloud.points[i]), i);
  return d;
}

}  // namespace

std::vector<std::size_t> radius_neighbors(const PointCloud& cloud, std::size_t center, double radius) {
  if (!(radius > 0.0)) throw ValidationError("radius_neighbors: radius must be positive");
  auto d = distances_from(cloud, center);
  const double r2 = radius * radius;
  std::erase_if(d, [r2](const auto& e) { return e.first > r2; });
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  out.reserve(d.size());
  for (const auto& e : d) out.push_back(e.second);
  return out;
}

std::vector<std::size_t> knn(const PointCloud& cloud, std::size_t center, std::size_t k) {
  if (k < 1 || k > cloud.size()) throw ValidationError("knn: k must be in [1, n]");
  auto d = distances_from(cloud, center);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

}  // namespace groupseg
