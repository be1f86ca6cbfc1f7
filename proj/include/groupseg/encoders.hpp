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
#include <random>
#include <string>
#include <vector>

#include "groupseg/autodiff.hpp"
#include "groupseg/mlp.hpp"
#include "groupseg/pointcloud.hpp"

namespace groupseg {

inline constexpr std::size_t kFeatureWidth = 128;
inline constexpr std::array<std::size_t, 3> kMsgScaleWidths{32, 32, 64};
inline constexpr std::size_t kMrgHalfWidth = 64;

enum class FeatureKind { kMsg, kMrg };

struct EncoderConfig {
  std::array<double, 3> radii{0.2, 0.4, 0.8};
  std::size_t hidden = 32;
  /// Hidden layers of width `hidden` in every point-wise network.
  std::size_t hidden_layers = 1;
  /// Max neighbours kept per radius query (uniform seeded subsample); 0 keeps all.
  std::size_t neighbor_cap = 64;
  std::uint64_t sample_seed = 0;

  void validate() const;
};

/// Shared point-wise networks of one encoder. MSG holds one net per radius;
/// MRG holds a small-radius net (level 1) and a large-radius net.
struct EncoderWeights {
  FeatureKind kind = FeatureKind::kMsg;
  EncoderConfig config;
  std::vector<Mlp> nets;

  void validate() const;
  std::vector<Tensor*> parameters();
  void set_requires_grad(bool on);
};

EncoderWeights make_encoder(FeatureKind kind, const EncoderConfig& config, std::mt19937_64& rng);

/// Neighbourhoods of every point for one radius, flattened: rows
/// [offsets[q], offsets[q+1]) of `relative` are neighbour − q.
struct Grouping {
  double radius = 0.0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> indices;
  Tensor relative;
};

/// Groupings for all three radii of a config. Pure; build once per cloud.
struct CloudGroups {
  std::array<Grouping, 3> scales;
  std::size_t n_points = 0;
};

Grouping build_grouping(const PointCloud& cloud, double radius, std::size_t cap, std::uint64_t seed);
CloudGroups build_groups(const PointCloud& cloud, const EncoderConfig& config);

/// Differentiable n×128 feature field on a tape.
Var encode(Tape& tape, const CloudGroups& groups, EncoderWeights& weights);

struct FeatureField {
  Tensor features;  // n × 128
  FeatureKind kind = FeatureKind::kMsg;
  std::string source_shape_id;
};

FeatureField msg_encode(const PointCloud& cloud, EncoderWeights& weights);
FeatureField mrg_encode(const PointCloud& cloud, EncoderWeights& weights);
FeatureField encode_field(const PointCloud& cloud, const CloudGroups& groups, EncoderWeights& weights);

}  // namespace groupseg
