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
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "groupseg/checkpoint.hpp"
#include "groupseg/corruption.hpp"
#include "groupseg/error.hpp"
#include "groupseg/part_prior.hpp"
#include "groupseg/synth.hpp"

namespace groupseg {
namespace {

using testing::small_part_dataset;

SynthShape chair(std::uint64_t seed, std::size_t n = 160) {
  return synth_shape({ShapeFamily::kChairLike, n, true, 0.005, seed, "chair"});
}

BinaryMask random_mask(std::size_t n, std::mt19937_64& rng) {
  BinaryMask m;
  m.flags.resize(n);
  for (auto& f : m.flags) f = rng() % 3 == 0;
  m.flags[rng() % n] = 1;
  return m;
}

TEST(ForegroundDescriptor, SinglePointIsItsMsgRow) {
  PriorWeights w = make_prior(EncoderConfig{}, 1);
  const auto s = chair(1);
  const Tensor msg = msg_encode(s.cloud, w.msg).features;
  BinaryMask m;
  m.flags.assign(s.cloud.size(), 0);
  m.flags[42] = 1;
  const Tensor f = foreground_descriptor(s.cloud, m, w);
  for (std::size_t j = 0; j < kFeatureWidth; ++j) EXPECT_EQ(f[j], msg(42, j));
}

TEST(ForegroundDescriptor, FullMaskIsColumnMean) {
  PriorWeights w = make_prior(EncoderConfig{}, 2);
  const auto s = chair(2);
  const Tensor msg = msg_encode(s.cloud, w.msg).features;
  BinaryMask m;
  m.flags.assign(s.cloud.size(), 1);
  const Tensor f = foreground_descriptor(s.cloud, m, w);
  for (std::size_t j = 0; j < kFeatureWidth; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < s.cloud.size(); ++i) mean += msg(i, j);
    EXPECT_NEAR(f[j], mean / static_cast<double>(s.cloud.size()), 1e-12);
  }
}

TEST(ForegroundDescriptor, MeanLiesInsideTheEnvelope) {
  PriorWeights w = make_prior(EncoderConfig{}, 3);
  const auto s = chair(3);
  const Tensor msg = msg_encode(s.cloud, w.msg).features;
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask m = random_mask(s.cloud.size(), rng);
    const Tensor f = foreground_descriptor(s.cloud, m, w);
    for (std::size_t j = 0; j < kFeatureWidth; ++j) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t i : m.foreground()) {
        lo = std::min(lo, msg(i, j));
        hi = std::max(hi, msg(i, j));
      }
      EXPECT_GE(f[j], lo - 1e-12);
      EXPECT_LE(f[j], hi + 1e-12);
    }
  }
}

TEST(ForegroundDescriptor, EmptyForegroundHasItsOwnError) {
  PriorWeights w = make_prior(EncoderConfig{}, 4);
  const auto s = chair(4);
  BinaryMask m;
  m.flags.assign(s.cloud.size(), 0);
  EXPECT_THROW(foreground_descriptor(s.cloud, m, w), EmptyForegroundError);
}

TEST(ForegroundDescriptor, SoftVersionMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Tensor field = testing::random_matrix(12, 6, rng);
  const Tensor weights = testing::random_matrix(12, 1, rng, 0.1, 1.0);
  const testing::ScalarFn f = [](Tape&, const std::vector<Var>& v) {
    return testing::contract(foreground_descriptor(v[0], v[1]));
  };
  EXPECT_LE(testing::gradient_relative_error(f, {field, weights}), 1e-4);
}

TEST(Denoise, RandomWeightsGiveDefinedDeterministicProbabilities) {
  PriorWeights w = make_prior(EncoderConfig{}, 6);
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto s = chair(10 + seed);
    const BinaryMask m = random_mask(s.cloud.size(), rng);
    const auto p = denoise(s.cloud, m, w);
    ASSERT_EQ(p.size(), s.cloud.size());
    for (double v : p) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(denoise(s.cloud, m, w), p);
  }
}

TEST(Denoise, EmptyForegroundVanishes) {
  PriorWeights w = make_prior(EncoderConfig{}, 8);
  const auto s = chair(8);
  BinaryMask m;
  m.flags.assign(s.cloud.size(), 0);
  const auto p = denoise(s.cloud, m, w);
  EXPECT_EQ(p, std::vector<double>(s.cloud.size(), 0.0));
}

TEST(Denoise, LengthMismatchRejected) {
  PriorWeights w = make_prior(EncoderConfig{}, 9);
  const auto s = chair(9);
  BinaryMask m;
  m.flags.assign(s.cloud.size() - 1, 1);
  EXPECT_THROW(denoise(s.cloud, m, w), ValidationError);
}

TEST(PartMasks, OneMaskPerGroupLeavingBackground) {
  const KWayLabeling l{{0, 0, 2, 2, 2}, 3};
  const auto masks = part_masks(l);
  ASSERT_EQ(masks.size(), 2u);
  EXPECT_EQ(masks[1].foreground(), (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_TRUE(part_masks(KWayLabeling{{1, 1, 1}, 2}).empty());
}

TEST(TrainPrior, ZeroStepsReturnsInitialization) {
  PriorTrainConfig cfg;
  cfg.steps = 0;
  cfg.seed = 11;
  const auto r = train_prior(small_part_dataset(2, 96, 1), cfg);
  PriorWeights init = make_prior(cfg.encoder, cfg.seed);
  auto a = const_cast<PriorWeights&>(r.weights).parameters();
  auto b = init.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->size(); ++j) ASSERT_EQ((*a[i])[j], (*b[i])[j]);
}

TEST(TrainPrior, ReproducibleForFixedSeed) {
  PriorTrainConfig cfg;
  cfg.steps = 6;
  cfg.log_every = 3;
  const auto data = small_part_dataset(3, 96, 2);
  auto a = train_prior(data, cfg);
  auto b = train_prior(data, cfg);
  const auto pa = a.weights.parameters(), pb = b.weights.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->size(); ++j) ASSERT_EQ((*pa[i])[j], (*pb[i])[j]);
  ASSERT_EQ(a.curve.size(), 3u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].validation_loss, b.curve[i].validation_loss);
  cfg.seed = 2;
  auto c = train_prior(data, cfg);
  EXPECT_NE((*c.weights.parameters()[0])[0], (*pa[0])[0]);
}

TEST(TrainPrior, ValidationLossDecreases) {
  PriorTrainConfig cfg;
  cfg.steps = 400;
  cfg.log_every = 400;
  cfg.adam.learning_rate = 2e-3;
  cfg.seed = 5;
  const auto r = train_prior(small_part_dataset(6, 128, 3), cfg);
  ASSERT_EQ(r.curve.size(), 2u);
  EXPECT_LT(r.curve.back().validation_loss, r.curve.front().validation_loss);
}

TEST(TrainPrior, IdentityCorruptionLearnsToCopy) {
  PriorWeights w = testing::identity_prior();
  const auto held = small_part_dataset(6, 128, 500);
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& ex : held)
    for (const auto& m : ex.parts) {
      acc += denoise_accuracy(denoise(ex.cloud, m, w), m);
      ++count;
    }
  EXPECT_GE(acc / static_cast<double>(count), 0.99);
}

TEST(TrainPrior, InvalidInputsRejected) {
  PriorTrainConfig cfg;
  cfg.steps = 1;
  EXPECT_THROW(train_prior({}, cfg), ValidationError);
  auto data = small_part_dataset(1, 96, 1);
  auto bad = cfg;
  bad.rate_hi = 0.6;
  EXPECT_THROW(train_prior(data, bad), ValidationError);
  bad = cfg;
  bad.batch = 0;
  EXPECT_THROW(train_prior(data, bad), ValidationError);
  data[0].parts[0].flags.assign(data[0].cloud.size(), 0);
  EXPECT_THROW(train_prior(data, cfg), ValidationError);
}

TEST(PriorCheckpoint, RoundTripPreservesEveryValue) {
  testing::TempDir dir;
  PriorWeights w = make_prior(EncoderConfig{}, 12);
  save_prior(w, dir.path() / "p.ckpt");
  PriorWeights back = load_prior(dir.path() / "p.ckpt");
  const auto a = w.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i]->shape(), b[i]->shape());
    for (std::size_t j = 0; j < a[i]->size(); ++j) ASSERT_EQ((*a[i])[j], (*b[i])[j]);
  }
  EXPECT_EQ(back.msg.config.radii, w.msg.config.radii);
  EXPECT_EQ(back.msg.config.neighbor_cap, w.msg.config.neighbor_cap);
}

TEST(PriorCheckpoint, CorruptFilesRejected) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "bad.ckpt") << "groupseg-checkpoint 99\n";
  EXPECT_THROW(load_prior(dir.path() / "bad.ckpt"), ValidationError);
  Checkpoint c;
  c.meta["model"] = "something-else";
  save_checkpoint(c, dir.path() / "other.ckpt");
  EXPECT_THROW(load_prior(dir.path() / "other.ckpt"), ValidationError);
  EXPECT_THROW(load_prior(dir.path() / "missing.ckpt"), ValidationError);
}

TEST(PriorWeights, ClassifierInputIsMrgPlusDescriptor) {
  PriorWeights w = make_prior(EncoderConfig{}, 13);
  EXPECT_EQ(w.classifier.point_weight.rows() + w.classifier.fg_weight.rows(), 2 * kFeatureWidth);
  EXPECT_EQ(w.classifier.tail.back().out_width(), 2u);
}

}  // namespace
}  // namespace groupseg
