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
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "groupseg/corruption.hpp"
#include "groupseg/error.hpp"
#include "groupseg/neighbors.hpp"
#include "groupseg/pointcloud.hpp"
#include "groupseg/synth.hpp"

namespace fs = std::filesystem;

namespace groupseg {
namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("groupseg_pc_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {g(rng), g(rng), 0.5 * g(rng)};
  return make_cloud("random", std::move(pts));
}

// ------------------------------------------------------------ clouds & IO

TEST(PointCloud, CubeCornersNormalize) {
  TempDir dir;
  std::ofstream(dir.path() / "cube.xyz") << "# corners\n0 0 0\n2 0 0\n0 2 0\n0 0 2\n2 2 0\n2 0 2\n0 2 2\n2 2 2\n";
  const auto loaded = load_pointcloud(dir.path() / "cube.xyz");
  ASSERT_EQ(loaded.cloud.size(), 8u);
  Vec3 c{0, 0, 0};
  for (const auto& p : loaded.cloud.points) {
    for (int k = 0; k < 3; ++k) c[k] += p[k] / 8.0;
    EXPECT_NEAR(std::sqrt(squared_distance(p, {0, 0, 0})), 1.0, 1e-12);
  }
  for (double v : c) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_NEAR(loaded.transform.centroid[0], 1.0, 1e-12);
  EXPECT_NEAR(loaded.transform.scale, std::sqrt(3.0), 1e-12);
}

TEST(PointCloud, MalformedLineNamesTheLine) {
  TempDir dir;
  std::ofstream(dir.path() / "bad.xyz") << "0 0 0\n1 0 0\n1 2\n";
  try {
    load_pointcloud(dir.path() / "bad.xyz");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(PointCloud, TooFewOrDegeneratePointsRejected) {
  EXPECT_THROW(make_cloud("x", std::vector<Vec3>(7, Vec3{1, 2, 3})), ValidationError);
  EXPECT_THROW(make_cloud("x", std::vector<Vec3>(9, Vec3{1, 2, 3})), ValidationError);
  std::vector<Vec3> pts(9, Vec3{0, 0, 0});
  pts[3] = {1, 0, 0};
  pts[4] = {NAN, 0, 0};
  EXPECT_THROW(make_cloud("x", pts), ValidationError);
  TempDir dir;
  EXPECT_THROW(load_pointcloud(dir.path() / "missing.xyz"), ValidationError);
}

TEST(PointCloud, SaveLoadRoundTrip) {
  TempDir dir;
  const PointCloud c = random_cloud(300, 4);
  save_pointcloud(c, dir.path() / "c.xyz");
  const auto back = load_pointcloud(dir.path() / "c.xyz");
  ASSERT_EQ(back.cloud.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(back.cloud.points[i][k], c.points[i][k], 1e-9);
}

TEST(PointCloud, NormalizationIsIdempotent) {
  PointCloud c = random_cloud(200, 5);
  auto pts = c.points;
  normalize_points(pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(pts[i][k], c.points[i][k], 1e-9);
}

TEST(Labeling, RoundTripIsExact) {
  TempDir dir;
  const KWayLabeling small{{0, 1, 0}, 2};
  save_labeling(small, dir.path() / "s.labels");
  EXPECT_EQ(slurp(dir.path() / "s.labels"), "0\n1\n0\n");
  EXPECT_EQ(load_labeling(dir.path() / "s.labels").labels, small.labels);

  std::mt19937_64 rng(6);
  KWayLabeling big{std::vector<int>(2048), 5};
  for (int& l : big.labels) l = static_cast<int>(rng() % 5);
  save_labeling(big, dir.path() / "b.labels");
  const std::string bytes = slurp(dir.path() / "b.labels");
  save_labeling(load_labeling(dir.path() / "b.labels", 5), dir.path() / "b2.labels");
  EXPECT_EQ(slurp(dir.path() / "b2.labels"), bytes);
}

TEST(Labeling, NegativeOrMalformedRejected) {
  TempDir dir;
  std::ofstream(dir.path() / "neg.labels") << "0\n-1\n";
  EXPECT_THROW(load_labeling(dir.path() / "neg.labels"), ValidationError);
  std::ofstream(dir.path() / "txt.labels") << "0\nseat\n";
  EXPECT_THROW(load_labeling(dir.path() / "txt.labels"), ValidationError);
  std::ofstream(dir.path() / "ok.labels") << "0\n3\n";
  EXPECT_THROW(load_labeling(dir.path() / "ok.labels", 3), ValidationError);
}

TEST(Labeling, AlignmentCheckedAgainstCloud) {
  const PointCloud c = random_cloud(10, 7);
  EXPECT_NO_THROW(check_aligned(c, KWayLabeling{std::vector<int>(10, 0), 1}));
  EXPECT_THROW(check_aligned(c, KWayLabeling{std::vector<int>(9, 0), 1}), ValidationError);
}

TEST(Labeling, LabelsUsedAndMasks) {
  const KWayLabeling l{{3, 0, 3, 3}, 5};
  EXPECT_EQ(l.labels_used(), (std::vector<int>{0, 3}));
  const BinaryMask m = mask_for_label(l, 3);
  EXPECT_EQ(m.foreground(), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(m.background(), (std::vector<std::size_t>{1}));
  EXPECT_THROW((KWayLabeling{{0, 5}, 5}.validate()), ValidationError);
}

TEST(ShapeSet, NeedsTwoShapesAndAlignedTruth) {
  ShapeSet s;
  s.shapes.push_back(random_cloud(20, 1));
  s.ground_truth.push_back(std::nullopt);
  EXPECT_THROW(s.validate(), ValidationError);
  s.shapes.push_back(random_cloud(20, 2));
  s.ground_truth.push_back(KWayLabeling{std::vector<int>(19, 0), 1});
  EXPECT_THROW(s.validate(), ValidationError);
  s.ground_truth.back() = KWayLabeling{std::vector<int>(20, 0), 1};
  EXPECT_NO_THROW(s.validate());
}

// -------------------------------------------------------------- neighbors

std::vector<std::size_t> brute_radius(const PointCloud& c, std::size_t q, double r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (squared_distance(c.points[i], c.points[q]) <= r * r) out.push_back(i);
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return squared_distance(c.points[a], c.points[q]) < squared_distance(c.points[b], c.points[q]);
  });
  return out;
}

TEST(Neighbors, MatchBruteForceScan) {
  const PointCloud c = random_cloud(400, 8);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> radius(0.05, 0.8);
  for (int t = 0; t < 200; ++t) {
    const std::size_t q = rng() % c.size();
    const double r = radius(rng);
    const auto expected = brute_radius(c, q, r);
    EXPECT_EQ(radius_neighbors(c, q, r), expected);
    const std::size_t k = 1 + rng() % 40;
    auto all = brute_radius(c, q, 10.0);
    all.resize(k);
    EXPECT_EQ(knn(c, q, k), all);
  }
}

TEST(Neighbors, TiesBrokenByIndex) {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {2, 2, 2}};
  const PointCloud c = make_cloud("ties", pts);
  EXPECT_EQ(knn(c, 0, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Neighbors, LargeRadiusAndSingleNeighbour) {
  const PointCloud c = random_cloud(50, 10);
  EXPECT_EQ(radius_neighbors(c, 7, 3.0).size(), 50u);
  EXPECT_EQ(knn(c, 7, 1), (std::vector<std::size_t>{7}));
}

// ------------------------------------------------------------------ synth

TEST(Synth, TwoBoxHasTwoLabels) {
  const auto s = synth_shape({ShapeFamily::kTwoBox, 512, false, 0.0, 1, "tb"});
  EXPECT_EQ(s.cloud.size(), 512u);
  EXPECT_EQ(s.ground_truth.labels_used(), (std::vector<int>{0, 1}));
}

TEST(Synth, ArmlessChairOmitsArmLabel) {
  const auto s = synth_shape({ShapeFamily::kChairLike, 512, false, 0.0, 2, "c"});
  const auto used = s.ground_truth.labels_used();
  EXPECT_EQ(std::count(used.begin(), used.end(), chair_labels::kArms), 0);
  EXPECT_EQ(used.size(), 3u);
  const auto armed = synth_shape({ShapeFamily::kChairLike, 512, true, 0.0, 2, "c"});
  EXPECT_EQ(armed.ground_truth.labels_used().size(), 4u);
}

TEST(Synth, DeterministicPerSeed) {
  const SynthSpec spec{ShapeFamily::kChairLike, 300, true, 0.01, 42, "c"};
  const auto a = synth_shape(spec), b = synth_shape(spec);
  EXPECT_EQ(a.cloud.points, b.cloud.points);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  SynthSpec other = spec;
  other.seed = 43;
  EXPECT_NE(synth_shape(other).cloud.points, a.cloud.points);
}

TEST(Synth, EveryFamilyRespectsBoundsAndNormalization) {
  for (auto fam : {ShapeFamily::kTwoBox, ShapeFamily::kChairLike, ShapeFamily::kTableLike, ShapeFamily::kLampLike}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = synth_shape({fam, 256, seed % 2 == 0, 0.005, seed, ""});
      s.ground_truth.validate();
      EXPECT_EQ(s.ground_truth.k_bound, family_k_bound(fam));
      EXPECT_LE(s.ground_truth.labels_used().size(), static_cast<std::size_t>(family_k_bound(fam)));
      double r = 0.0;
      Vec3 c{0, 0, 0};
      for (const auto& p : s.cloud.points) {
        r = std::max(r, std::sqrt(squared_distance(p, {0, 0, 0})));
        for (int k = 0; k < 3; ++k) c[k] += p[k] / 256.0;
      }
      EXPECT_LE(r, 1.0 + 1e-6);
      for (double v : c) EXPECT_NEAR(v, 0.0, 1e-6);
    }
    EXPECT_EQ(parse_family(family_name(fam)), fam);
  }
}

TEST(Synth, InvalidSpecsRejected) {
  EXPECT_THROW(synth_shape({ShapeFamily::kTwoBox, 63, false, 0.0, 1, ""}), ValidationError);
  EXPECT_THROW(synth_shape({ShapeFamily::kTwoBox, 128, false, -0.1, 1, ""}), ValidationError);
  EXPECT_THROW(parse_family("sofa"), ValidationError);
}

// ------------------------------------------------------------- corruption

BinaryMask first_n(std::size_t n, std::size_t fg) {
  BinaryMask m;
  m.flags.assign(n, 0);
  for (std::size_t i = 0; i < fg; ++i) m.flags[i] = 1;
  return m;
}

TEST(Corruption, ZeroRatesAreIdentity) {
  const PointCloud c = random_cloud(64, 11);
  const BinaryMask m = first_n(64, 20);
  EXPECT_EQ(corrupt_mask(c, m, {0.0, 0.0, 5}), m);
}

TEST(Corruption, DeleteCountIsFloored) {
  const PointCloud c = random_cloud(200, 12);
  const BinaryMask m = first_n(200, 100);
  const BinaryMask out = corrupt_mask(c, m, {0.0, 0.25, 3});
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < 200; ++i) flipped += m.flags[i] != out.flags[i];
  EXPECT_EQ(flipped, 25u);
  EXPECT_EQ(out.foreground_count(), 75u);
}

TEST(Corruption, ExactFlipCountsAndNeverEmpty) {
  std::mt19937_64 rng(13);
  const auto shape = synth_shape({ShapeFamily::kChairLike, 400, true, 0.0, 9, "c"});
  for (int t = 0; t < 50; ++t) {
    const BinaryMask m = mask_for_label(shape.ground_truth, static_cast<int>(rng() % 4));
    std::uniform_real_distribution<double> rate(0.0, 0.5);
    const CorruptionSpec spec{rate(rng), rate(rng), rng()};
    const BinaryMask out = corrupt_mask(shape.cloud, m, spec);
    std::size_t deleted = 0, inserted = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      deleted += m.flags[i] && !out.flags[i];
      inserted += !m.flags[i] && out.flags[i];
    }
    EXPECT_EQ(deleted, static_cast<std::size_t>(std::floor(spec.delete_rate * m.foreground_count())));
    EXPECT_EQ(inserted, static_cast<std::size_t>(std::floor(spec.insert_rate * m.background().size())));
    EXPECT_GT(out.foreground_count(), 0u);
    EXPECT_EQ(corrupt_mask(shape.cloud, m, spec), out);
  }
}

TEST(Corruption, InsertionsPreferTheVicinity) {
  const auto shape = synth_shape({ShapeFamily::kChairLike, 512, false, 0.0, 3, "c"});
  const BinaryMask seat = mask_for_label(shape.ground_truth, chair_labels::kSeat);
  Vec3 lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
  for (std::size_t i : seat.foreground())
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], shape.cloud.points[i][k]);
      hi[k] = std::max(hi[k], shape.cloud.points[i][k]);
    }
  auto box_distance = [&](const Vec3& p) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = p[k] < lo[k] ? lo[k] - p[k] : (p[k] > hi[k] ? p[k] - hi[k] : 0.0);
      d2 += e * e;
    }
    return std::sqrt(d2);
  };
  std::size_t near_bg = 0;
  for (std::size_t i : seat.background()) near_bg += box_distance(shape.cloud.points[i]) <= kInsertionVicinity;
  const BinaryMask out = corrupt_mask(shape.cloud, seat, {0.2, 0.0, 17});
  const std::size_t n_insert = static_cast<std::size_t>(std::floor(0.2 * seat.background().size()));
  std::size_t inserted_near = 0;
  for (std::size_t i : seat.background())
    if (out.flags[i]) inserted_near += box_distance(shape.cloud.points[i]) <= kInsertionVicinity;
  EXPECT_EQ(inserted_near, std::min(near_bg, n_insert));
}

TEST(Corruption, InvalidRequestsRejected) {
  const PointCloud c = random_cloud(20, 14);
  EXPECT_THROW(corrupt_mask(c, first_n(20, 5), {0.6, 0.0, 1}), ValidationError);
  EXPECT_THROW(corrupt_mask(c, first_n(20, 20), {0.1, 0.1, 1}), ValidationError);
  EXPECT_THROW(corrupt_mask(c, first_n(19, 5), {0.1, 0.1, 1}), ValidationError);
}

}  // namespace
}  // namespace groupseg
