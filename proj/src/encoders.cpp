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

#include "groupseg/encoders.hpp"

#include <algorithm>
#include <numeric>

#include "groupseg/error.hpp"
#include "groupseg/neighbors.hpp"

namespace groupseg {

void EncoderConfig::validate() const {
  double prev = 0.0;
  for (double r : radii) {
    if (!(r > prev) || r > 2.0) throw ValidationError("encoder radii must be strictly increasing within (0, 2]");
    prev = r;
  }
  if (hidden == 0) throw ValidationError("encoder hidden width must be positive");
  if (hidden_layers == 0) throw ValidationError("encoder needs at least one hidden layer");
}

void EncoderWeights::validate() const {
  config.validate();
  std::vector<std::size_t> widths;
  if (kind == FeatureKind::kMsg) {
    widths.assign(kMsgScaleWidths.begin(), kMsgScaleWidths.end());
  } else {
    widths = {kMrgHalfWidth, kMrgHalfWidth};
  }
  if (nets.size() != widths.size()) throw ValidationError("encoder: wrong number of point-wise networks");
  std::size_t total = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    if (nets[i].size() != config.hidden_layers + 1 || nets[i].front().in_width() != 3 ||
        nets[i].back().out_width() != widths[i]) {
      throw ValidationError("encoder: network " + std::to_string(i) + " has the wrong input/output width");
    }
    total += widths[i];
  }
  if (total != kFeatureWidth) throw ValidationError("encoder: output widths must sum to 128");
}

std::vector<Tensor*> EncoderWeights::parameters() {
  std::vector<Tensor*> out;
  for (auto& net : nets)
    for (Tensor* p : groupseg::parameters(net)) out.push_back(p);
  return out;
}

void EncoderWeights::set_requires_grad(bool on) {
  for (auto& net : nets) groupseg::set_requires_grad(net, on);
}

EncoderWeights make_encoder(FeatureKind kind, const EncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  EncoderWeights w;
  w.kind = kind;
  w.config = config;
  auto widths = [&](std::size_t out) {
    std::vector<std::size_t> v{3};
    v.insert(v.end(), config.hidden_layers, config.hidden);
    v.push_back(out);
    return v;
  };
  if (kind == FeatureKind::kMsg) {
    for (std::size_t width : kMsgScaleWidths)
      w.nets.push_back(make_mlp(widths(width), Activation::kRelu, Activation::kRelu, rng));
  } else {
    for (int i = 0; i < 2; ++i)
      w.nets.push_back(make_mlp(widths(kMrgHalfWidth), Activation::kRelu, Activation::kRelu, rng));
  }
  return w;
}

Grouping build_grouping(const PointCloud& cloud, double radius, std::size_t cap, std::uint64_t seed) {
  Grouping g;
  g.radius = radius;
  g.offsets.reserve(cloud.size() + 1);
  g.offsets.push_back(0);
  for (std::size_t q = 0; q < cloud.size(); ++q) {
    auto nb = radius_neighbors(cloud, q, radius);
    if (cap > 0 && nb.size() > cap) {
      std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (q + 1)) ^ static_cast<std::uint64_t>(radius * 1e6));
      // The centre always stays; the rest is a uniform subsample.
      const auto self = static_cast<std::size_t>(std::find(nb.begin(), nb.end(), q) - nb.begin());
      std::vector<std::size_t> pick;
      pick.reserve(nb.size());
      for (std::size_t i = 0; i < nb.size(); ++i)
        if (i != self) pick.push_back(i);
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(cap - 1);
      pick.push_back(self);
      std::sort(pick.begin(), pick.end());
      std::vector<std::size_t> kept;
      kept.reserve(cap);
      for (auto i : pick) kept.push_back(nb[i]);
      nb = std::move(kept);
    }
    g.indices.insert(g.indices.end(), nb.begin(), nb.end());
    g.offsets.push_back(g.indices.size());
  }
  g.relative = Tensor::matrix(g.indices.size(), 3);
  for (std::size_t q = 0; q < cloud.size(); ++q) {
    for (std::size_t r = g.offsets[q]; r < g.offsets[q + 1]; ++r) {
      for (int k = 0; k < 3; ++k) g.relative(r, k) = cloud.points[g.indices[r]][k] - cloud.points[q][k];
    }
  }
  return g;
}

CloudGroups build_groups(const PointCloud& cloud, const EncoderConfig& config) {
  config.validate();
  CloudGroups out;
  out.n_points = cloud.size();
  for (std::size_t s = 0; s < 3; ++s)
    out.scales[s] = build_grouping(cloud, config.radii[s], config.neighbor_cap, config.sample_seed + s);
  return out;
}

namespace {

// Shared point-wise network over every neighbourhood, then max-pool.
Var pointnet_pool(Tape& tape, const Grouping& g, Mlp& net) {
  std::vector<PointwiseLayer> layers;
  for (auto& l : net)
    layers.push_back({tape.parameter(l.weight), tape.parameter(l.bias), l.activation == Activation::kRelu});
  return pointwise_mlp_max(tape.constant(g.relative), layers, g.offsets);
}

}  // namespace

Var encode(Tape& tape, const CloudGroups& groups, EncoderWeights& weights) {
  weights.validate();
  if (weights.kind == FeatureKind::kMsg) {
    std::vector<Var> scales;
    for (std::size_t s = 0; s < 3; ++s) scales.push_back(pointnet_pool(tape, groups.scales[s], weights.nets[s]));
    return concat_cols(scales);
  }
  const Grouping& small = groups.scales[0];
  const Grouping& large = groups.scales[2];
  Var level1 = pointnet_pool(tape, small, weights.nets[0]);
  Var recursive = gather_segment_max(level1, large.indices, large.offsets);
  Var direct = pointnet_pool(tape, large, weights.nets[1]);
  return concat_cols({recursive, direct});
}

FeatureField encode_field(const PointCloud& cloud, const CloudGroups& groups, EncoderWeights& weights) {
  if (groups.n_points != cloud.size()) throw ValidationError("encode: groupings were built for another cloud");
  Tape tape;
  Var f = encode(tape, groups, weights);
  return FeatureField{f.value(), weights.kind, cloud.id};
}

FeatureField msg_encode(const PointCloud& cloud, EncoderWeights& weights) {
  if (weights.kind != FeatureKind::kMsg) throw ValidationError("msg_encode: weights are not MSG weights");
  return encode_field(cloud, build_groups(cloud, weights.config), weights);
}

FeatureField mrg_encode(const PointCloud& cloud, EncoderWeights& weights) {
  if (weights.kind != FeatureKind::kMrg) throw ValidationError("mrg_encode: weights are not MRG weights");
  return encode_field(cloud, build_groups(cloud, weights.config), weights);
}

}  // namespace groupseg
