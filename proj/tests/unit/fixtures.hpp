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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "groupseg/part_prior.hpp"
#include "groupseg/synth.hpp"

namespace groupseg::testing {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("groupseg_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Small mixed two_box / chair_like training set.
inline std::vector<PartExample> small_part_dataset(std::size_t shapes, std::size_t n_points, std::uint64_t seed0) {
  std::vector<PartExample> out;
  for (std::size_t i = 0; i < shapes; ++i) {
    SynthSpec s;
    s.family = i % 2 ? ShapeFamily::kChairLike : ShapeFamily::kTwoBox;
    s.n_points = n_points;
    s.with_arms = i % 4 == 1;
    s.seed = seed0 + i;
    s.jitter = 0.005;
    const auto shape = synth_shape(s);
    out.push_back({shape.cloud, part_masks(shape.ground_truth)});
  }
  return out;
}

/// Prior trained with corruption rates (0, 0): it learns to copy its input.
inline PriorWeights identity_prior(std::size_t steps = 1000) {
  PriorTrainConfig cfg;
  cfg.steps = steps;
  cfg.rate_lo = 0.0;
  cfg.rate_hi = 0.0;
  cfg.adam.learning_rate = 3e-3;
  cfg.log_every = 0;
  cfg.seed = 3;
  return train_prior(small_part_dataset(8, 128, 40), cfg).weights;
}

}  // namespace groupseg::testing
