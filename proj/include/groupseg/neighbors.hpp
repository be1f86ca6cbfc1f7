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
#include <vector>

#include "groupseg/pointcloud.hpp"

namespace groupseg {

/// All indices within Euclidean `radius` (inclusive) of the center point,
/// center included, sorted by distance then index.
std::vector<std::size_t> radius_neighbors(const PointCloud& cloud, std::size_t center, double radius);

/// The k nearest indices (center first), ties broken by lower index.
std::vector<std::size_t> knn(const PointCloud& cloud, std::size_t center, std::size_t k);

}  // namespace groupseg
