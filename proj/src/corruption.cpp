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

#include "groupseg/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "groupseg/error.hpp"

namespace groupseg {

void CorruptionSpec::validate() const {
  auto ok = [](double r) { return r >= 0.0 && r <= 0.5; };
  if (!ok(insert_rate) || !ok(delete_rate)) throw ValidationError("corruption rates must lie in [0, 0.5]");
}

BinaryMask corrupt_mask(const PointCloud& cloud, const BinaryMask& mask, const CorruptionSpec& spec) {
  spec.validate();
  if (mask.size() != cloud.size()) throw ValidationError("corrupt_mask: mask length does not match the cloud");
  auto fg = mask.foreground();
  auto bg = mask.background();
  if (fg.empty() || bg.empty()) throw ValidationError("corrupt_mask: mask needs non-empty foreground and background");

  const auto n_delete = static_cast<std::size_t>(std::floor(spec.delete_rate * static_cast<double>(fg.size())));
  const auto n_insert = static_cast<std::size_t>(std::floor(spec.insert_rate * static_cast<double>(bg.size())));
  if (n_delete >= fg.size() && n_insert == 0) throw ValidationError("corrupt_mask: rates would empty the foreground");

  std::mt19937_64 rng(spec.seed);
  BinaryMask out = mask;

  std::shuffle(fg.begin(), fg.end(), rng);
  for (std::size_t i = 0; i < n_delete; ++i) out.flags[fg[i]] = 0;

  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (std::size_t i : mask.foreground()) {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], cloud.points[i][k]);
      hi[k] = std::max(hi[k], cloud.points[i][k]);
    }
  }
  std::vector<std::size_t> near, far;
  for (std::size_t i : bg) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double v = cloud.points[i][k];
      const double e = v < lo[k] ? lo[k] - v : (v > hi[k] ? v - hi[k] : 0.0);
      d2 += e * e;
    }
    (d2 <= kInsertionVicinity * kInsertionVicinity ? near : far).push_back(i);
  }
  std::shuffle(near.begin(), near.end(), rng);
  std::shuffle(far.begin(), far.end(), rng);
  for (std::size_t i = 0; i < n_insert; ++i) out.flags[i < near.size() ? near[i] : far[i - near.size()]] = 1;
  return out;
}

}  // namespace groupseg
