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

#include "groupseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

struct Box {
  Vec3 lo;
  Vec3 hi;

  double extent(int k) const { return hi[k] - lo[k]; }
  double face_area(int axis) const { return extent((axis + 1) % 3) * extent((axis + 2) % 3); }
  double area() const { return 2.0 * (face_area(0) + face_area(1) + face_area(2)); }
};

struct Group {
  int label;
  std::vector<Box> boxes;
  double area() const {
    double a = 0.0;
    for (const auto& b : boxes) a += b.area();
    return a;
  }
};

Box box_at(double cx, double y0, double cz, double sx, double sy, double sz) {
  return Box{{cx - sx / 2, y0, cz - sz / 2}, {cx + sx / 2, y0 + sy, cz + sz / 2}};
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  Vec3 on_surface(const Box& b) {
    const double a0 = b.face_area(0), a1 = b.face_area(1), a2 = b.face_area(2);
    double pick = uniform(0.0, a0 + a1 + a2);
    const int axis = pick < a0 ? 0 : (pick < a0 + a1 ? 1 : 2);
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = uniform(b.lo[k], b.hi[k]);
    p[axis] = uniform(0.0, 1.0) < 0.5 ? b.lo[axis] : b.hi[axis];
    return p;
  }

  Vec3 in_group(const Group& g) {
    if (g.boxes.size() == 1) return on_surface(g.boxes[0]);
    double total = g.area();
    double pick = uniform(0.0, total);
    for (const auto& b : g.boxes) {
      pick -= b.area();
      if (pick <= 0.0) return on_surface(b);
    }
    return on_surface(g.boxes.back());
  }

 private:
  std::mt19937_64 rng_;
};

std::vector<Group> two_box(Sampler& s) {
  const double w = s.uniform(0.8, 1.2), d = s.uniform(0.6, 1.0), h = s.uniform(0.25, 0.5);
  const double w2 = s.uniform(0.3, 0.6), d2 = s.uniform(0.3, 0.6), h2 = s.uniform(0.5, 0.9);
  const double off = s.uniform(-0.15, 0.15);
  return {Group{0, {box_at(0, 0, 0, w, h, d)}}, Group{1, {box_at(off, h, 0, w2, h2, d2)}}};
}

std::vector<Group> chair(Sampler& s, bool with_arms) {
  const double width = s.uniform(0.9, 1.2);
  const double depth = s.uniform(0.8, 1.05);
  const double seat_t = s.uniform(0.08, 0.13);
  const double seat_top = s.uniform(0.85, 1.1);
  const double leg_t = s.uniform(0.06, 0.1);
  const double inset = s.uniform(0.0, 0.05);
  const double back_h = s.uniform(0.8, 1.15);
  const double back_t = s.uniform(0.06, 0.1);
  const double leg_h = seat_top - seat_t;

  Group back{chair_labels::kBack, {box_at(0, seat_top, -depth / 2 + back_t / 2, width, back_h, back_t)}};
  Group seat{chair_labels::kSeat, {box_at(0, leg_h, 0, width, seat_t, depth)}};
  Group legs{chair_labels::kLegs, {}};
  const double lx = width / 2 - inset - leg_t / 2, lz = depth / 2 - inset - leg_t / 2;
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0}) legs.boxes.push_back(box_at(sx * lx, 0, sz * lz, leg_t, leg_h, leg_t));
  std::vector<Group> groups{back, seat, legs};
  if (with_arms) {
    const double arm_w = s.uniform(0.07, 0.11);
    const double arm_rise = s.uniform(0.25, 0.35);
    const double arm_len = depth * s.uniform(0.75, 0.95);
    Group arms{chair_labels::kArms, {}};
    for (double sx : {-1.0, 1.0}) {
      const double ax = sx * (width / 2 - arm_w / 2);
      arms.boxes.push_back(box_at(ax, seat_top + arm_rise, -depth / 2 + back_t + arm_len / 2, arm_w, 0.06, arm_len));
      arms.boxes.push_back(box_at(ax, seat_top, -depth / 2 + back_t + arm_len - arm_w / 2, arm_w, arm_rise, arm_w));
    }
    groups.push_back(arms);
  }
  return groups;
}

std::vector<Group> table(Sampler& s) {
  const double width = s.uniform(1.2, 1.8), depth = s.uniform(0.7, 1.1);
  const double top_t = s.uniform(0.06, 0.1), height = s.uniform(0.8, 1.0);
  const double leg_t = s.uniform(0.07, 0.11), inset = s.uniform(0.0, 0.08);
  Group top{0, {box_at(0, height - top_t, 0, width, top_t, depth)}};
  Group legs{1, {}};
  const double lx = width / 2 - inset - leg_t / 2, lz = depth / 2 - inset - leg_t / 2;
  for (double sx : {-1.0, 1.0})
    for (double sz : {-1.0, 1.0}) legs.boxes.push_back(box_at(sx * lx, 0, sz * lz, leg_t, height - top_t, leg_t));
  return {top, legs};
}

std::vector<Group> lamp(Sampler& s) {
  const double base_w = s.uniform(0.4, 0.7), base_h = s.uniform(0.05, 0.1);
  const double pole_t = s.uniform(0.04, 0.07), pole_h = s.uniform(0.9, 1.4);
  const double shade_w = s.uniform(0.45, 0.75), shade_h = s.uniform(0.3, 0.45);
  Group base{0, {box_at(0, 0, 0, base_w, base_h, base_w)}};
  Group pole{1, {box_at(0, base_h, 0, pole_t, pole_h, pole_t)}};
  Group shade{2, {box_at(0, base_h + pole_h, 0, shade_w, shade_h, shade_w)}};
  return {base, pole, shade};
}

// Largest-remainder split of n by area with at least `floor_count` per group.
std::vector<std::size_t> allocate(const std::vector<Group>& groups, std::size_t n, std::size_t floor_count) {
  double total = 0.0;
  for (const auto& g : groups) total += g.area();
  std::vector<std::size_t> counts(groups.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double exact = static_cast<double>(n) * groups[i].area() / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    rema.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::sort(rema.begin(), rema.end());
  for (std::size_t k = 0; used < n; ++k, ++used) ++counts[rema[k % rema.size()].second];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    while (counts[i] < floor_count) {
      auto big = std::max_element(counts.begin(), counts.end()) - counts.begin();
      --counts[static_cast<std::size_t>(big)];
      ++counts[i];
    }
  }
  return counts;
}

}  // namespace

ShapeFamily parse_family(const std::string& name) {
  if (name == "two_box") return ShapeFamily::kTwoBox;
  if (name == "chair_like") return ShapeFamily::kChairLike;
  if (name == "table_like") return ShapeFamily::kTableLike;
  if (name == "lamp_like") return ShapeFamily::kLampLike;
  throw ValidationError("unknown shape family '" + name + "'");
}

std::string family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kTwoBox: return "two_box";
    case ShapeFamily::kChairLike: return "chair_like";
    case ShapeFamily::kTableLike: return "table_like";
    case ShapeFamily::kLampLike: return "lamp_like";
  }
  return "unknown";
}

int family_k_bound(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kTwoBox: return 2;
    case ShapeFamily::kChairLike: return 4;
    case ShapeFamily::kTableLike: return 2;
    case ShapeFamily::kLampLike: return 3;
  }
  return 1;
}

std::vector<std::string> family_label_names(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kTwoBox: return {"lower", "upper"};
    case ShapeFamily::kChairLike: return {"back", "seat", "legs", "arms"};
    case ShapeFamily::kTableLike: return {"top", "legs"};
    case ShapeFamily::kLampLike: return {"base", "pole", "shade"};
  }
  return {};
}

void SynthSpec::validate() const {
  if (n_points < 64) throw ValidationError("synth: n_points must be at least 64");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ValidationError("synth: jitter must be finite and >= 0");
}

SynthShape synth_shape(const SynthSpec& spec) {
  spec.validate();
  Sampler s(spec.seed);
  std::vector<Group> groups;
  switch (spec.family) {
    case ShapeFamily::kTwoBox: groups = two_box(s); break;
    case ShapeFamily::kChairLike: groups = chair(s, spec.with_arms); break;
    case ShapeFamily::kTableLike: groups = table(s); break;
    case ShapeFamily::kLampLike: groups = lamp(s); break;
  }
  const auto counts = allocate(groups, spec.n_points, 8);

  std::vector<std::pair<Vec3, int>> samples;
  samples.reserve(spec.n_points);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i = 0; i < counts[g]; ++i) samples.emplace_back(s.in_group(groups[g]), groups[g].label);
  std::shuffle(samples.begin(), samples.end(), s.rng());
  if (spec.jitter > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.jitter);
    for (auto& e : samples)
      for (int k = 0; k < 3; ++k) e.first[k] += noise(s.rng());
  }

  std::vector<Vec3> pts;
  KWayLabeling gt;
  gt.k_bound = family_k_bound(spec.family);
  for (auto& e : samples) {
    pts.push_back(e.first);
    gt.labels.push_back(e.second);
  }
  std::string id = spec.id.empty() ? family_name(spec.family) + "_" + std::to_string(spec.seed) : spec.id;
  return SynthShape{make_cloud(std::move(id), std::move(pts)), std::move(gt)};
}

}  // namespace groupseg
