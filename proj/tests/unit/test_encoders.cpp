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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "groupseg/encoders.hpp"
#include "groupseg/error.hpp"
#include "groupseg/synth.hpp"

namespace groupseg {
namespace {

EncoderConfig exact_config(std::size_t hidden = 32) {
  EncoderConfig c;
  c.neighbor_cap = 0;
  c.hidden = hidden;
  return c;
}

// Raw (un-normalized) cloud so that individual points can be moved without
// renormalizing the rest.
PointCloud raw_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  PointCloud c;
  c.id = "raw";
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), 0.3 * u(rng)});
  return c;
}

FeatureField encode_kind(FeatureKind kind, const PointCloud& cloud, EncoderWeights& w) {
  return kind == FeatureKind::kMsg ? msg_encode(cloud, w) : mrg_encode(cloud, w);
}

class EncoderKinds : public ::testing::TestWithParam<FeatureKind> {};

TEST_P(EncoderKinds, OutputIs128WideAndFinite) {
  std::mt19937_64 rng(1);
  EncoderWeights w = make_encoder(GetParam(), EncoderConfig{}, rng);
  for (std::size_t n : {8u, 100u, 512u}) {
    const auto shape = synth_shape({ShapeFamily::kChairLike, std::max<std::size_t>(n, 64), true, 0.01, n, "c"});
    const FeatureField f = encode_kind(GetParam(), shape.cloud, w);
    EXPECT_EQ(f.features.rows(), shape.cloud.size());
    EXPECT_EQ(f.features.cols(), kFeatureWidth);
    EXPECT_TRUE(f.features.all_finite());
    EXPECT_EQ(f.kind, GetParam());
  }
}

TEST_P(EncoderKinds, PermutationEquivariant) {
  std::mt19937_64 rng(2);
  EncoderWeights w = make_encoder(GetParam(), exact_config(), rng);
  const PointCloud c = raw_cloud(150, 3);
  std::vector<std::size_t> perm(c.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud p = c;
  for (std::size_t i = 0; i < perm.size(); ++i) p.points[i] = c.points[perm[i]];
  const Tensor a = encode_kind(GetParam(), c, w).features;
  const Tensor b = encode_kind(GetParam(), p, w).features;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < kFeatureWidth; ++j) ASSERT_EQ(b(i, j), a(perm[i], j)) << "row " << i;
}

TEST_P(EncoderKinds, DuplicatePointsShareFeatures) {
  std::mt19937_64 rng(4);
  EncoderWeights w = make_encoder(GetParam(), exact_config(), rng);
  PointCloud c = raw_cloud(120, 5);
  c.points.push_back(c.points[17]);
  const Tensor f = encode_kind(GetParam(), c, w).features;
  for (std::size_t j = 0; j < kFeatureWidth; ++j) EXPECT_NEAR(f(17, j), f(120, j), 1e-12);
}

TEST_P(EncoderKinds, LocalityBeyondTheReceptiveField) {
  std::mt19937_64 rng(6);
  const EncoderConfig cfg = exact_config();
  EncoderWeights w = make_encoder(GetParam(), cfg, rng);
  const double reach = GetParam() == FeatureKind::kMsg ? cfg.radii[2] : cfg.radii[0] + cfg.radii[2];
  PointCloud c = raw_cloud(200, 7, 1.6);
  const Tensor before = encode_kind(GetParam(), c, w).features;
  // Move point 0 to a new position that is, like its old one, out of reach
  // of the probed points.
  const Vec3 old = c.points[0];
  c.points[0] = {old[0] + 0.05, old[1] - 0.04, old[2] + 0.03};
  const Tensor after = encode_kind(GetParam(), c, w).features;
  std::size_t probed = 0;
  for (std::size_t q = 1; q < c.size(); ++q) {
    const double d_old = std::sqrt(squared_distance(c.points[q], old));
    const double d_new = std::sqrt(squared_distance(c.points[q], c.points[0]));
    if (d_old <= reach + 1e-9 || d_new <= reach + 1e-9) continue;
    ++probed;
    for (std::size_t j = 0; j < kFeatureWidth; ++j) ASSERT_EQ(before(q, j), after(q, j)) << "point " << q;
  }
  EXPECT_GT(probed, 10u);
}

TEST_P(EncoderKinds, ZeroWeightsGiveZeroField) {
  std::mt19937_64 rng(8);
  EncoderWeights w = make_encoder(GetParam(), exact_config(), rng);
  for (Tensor* p : w.parameters()) std::fill(p->values().begin(), p->values().end(), 0.0);
  const Tensor f = encode_kind(GetParam(), raw_cloud(60, 9), w).features;
  for (double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST_P(EncoderKinds, WeightGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  EncoderWeights w = make_encoder(GetParam(), exact_config(4), rng);
  for (Tensor* p : w.parameters())
    for (auto& v : p->values()) v += 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);  // non-zero biases
  const PointCloud c = raw_cloud(40, 11, 0.6);
  const CloudGroups groups = build_groups(c, w.config);
  auto pooled = [&](Tape& tape) { return testing::contract(encode(tape, groups, w), 5); };
  auto value = [&] {
    Tape tape;
    return pooled(tape).item();
  };
  w.set_requires_grad(true);
  for (Tensor* p : w.parameters()) p->clear_grad();
  {
    Tape tape;
    tape.backward(pooled(tape));
  }
  // Thousands of ReLU and max-pool branches make it likely that a few
  // perturbations cross a kink. Those entries are detected by disagreeing
  // one-sided differences and must match one side exactly (a valid
  // subgradient); all other entries are held to the central difference.
  double diff = 0.0, scale = 0.0;
  std::size_t kinks = 0, checked = 0;
  const double h = 1e-5;
  const double base = value();
  for (Tensor* p : w.parameters()) {
    p->ensure_grad();
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = (*p)[i];
      (*p)[i] = keep + h;
      const double up = value();
      (*p)[i] = keep - h;
      const double down = value();
      (*p)[i] = keep;
      const double fwd = (up - base) / h, bwd = (base - down) / h;
      const double numeric = (up - down) / (2 * h);
      scale = std::max(scale, std::abs(numeric));
      ++checked;
      if (std::abs(fwd - bwd) > 1e-4 * std::max({std::abs(fwd), std::abs(bwd), 1.0})) {
        ++kinks;
        const double one_side = std::min(std::abs(fwd - analytic[i]), std::abs(bwd - analytic[i]));
        EXPECT_LE(one_side, 1e-4 * std::max(std::abs(analytic[i]), 1.0)) << "entry " << i;
        continue;
      }
      diff = std::max(diff, std::abs(numeric - analytic[i]));
    }
  }
  EXPECT_LE(diff / scale, 1e-4);
  EXPECT_LT(kinks * 20, checked) << "kinks should be rare";
}

INSTANTIATE_TEST_SUITE_P(Kinds, EncoderKinds, ::testing::Values(FeatureKind::kMsg, FeatureKind::kMrg),
                         [](const auto& info) { return info.param == FeatureKind::kMsg ? "Msg" : "Mrg"; });

TEST(Encoders, CapBoundsNeighbourhoodsDeterministically) {
  const auto shape = synth_shape({ShapeFamily::kTwoBox, 512, false, 0.0, 1, "tb"});
  const Grouping a = build_grouping(shape.cloud, 0.8, 64, 3);
  const Grouping b = build_grouping(shape.cloud, 0.8, 64, 3);
  EXPECT_EQ(a.indices, b.indices);
  for (std::size_t q = 0; q < shape.cloud.size(); ++q) {
    const std::size_t count = a.offsets[q + 1] - a.offsets[q];
    EXPECT_LE(count, 64u);
    EXPECT_GE(count, 1u);
    const auto begin = a.indices.begin() + static_cast<std::ptrdiff_t>(a.offsets[q]);
    EXPECT_NE(std::find(begin, begin + static_cast<std::ptrdiff_t>(count), q), begin + static_cast<std::ptrdiff_t>(count))
        << "centre " << q << " missing from its neighbourhood";
  }
}

TEST(Encoders, UncappedGroupingMatchesRadiusQuery) {
  const auto shape = synth_shape({ShapeFamily::kChairLike, 200, false, 0.0, 2, "c"});
  const Grouping g = build_grouping(shape.cloud, 0.4, 0, 0);
  for (std::size_t q = 0; q < shape.cloud.size(); q += 7) {
    for (std::size_t r = g.offsets[q]; r < g.offsets[q + 1]; ++r) {
      const auto& p = shape.cloud.points[g.indices[r]];
      for (int k = 0; k < 3; ++k) EXPECT_EQ(g.relative(r, k), p[k] - shape.cloud.points[q][k]);
      EXPECT_LE(squared_distance(p, shape.cloud.points[q]), 0.16 + 1e-12);
    }
  }
}

TEST(Encoders, InvalidConfigurationsRejected) {
  EncoderConfig c;
  c.radii = {0.4, 0.2, 0.8};
  EXPECT_THROW(c.validate(), ValidationError);
  c.radii = {0.2, 0.4, 2.5};
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.hidden = 0;
  EXPECT_THROW(c.validate(), ValidationError);

  std::mt19937_64 rng(1);
  EncoderWeights w = make_encoder(FeatureKind::kMsg, EncoderConfig{}, rng);
  const auto shape = synth_shape({ShapeFamily::kTwoBox, 64, false, 0.0, 1, "tb"});
  EXPECT_THROW(mrg_encode(shape.cloud, w), ValidationError);
  w.nets.pop_back();
  EXPECT_THROW(msg_encode(shape.cloud, w), ValidationError);
}

}  // namespace
}  // namespace groupseg
