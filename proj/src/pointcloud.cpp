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

#include "groupseg/pointcloud.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "groupseg/error.hpp"

namespace groupseg {

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

NormalizeTransform normalize_points(std::vector<Vec3>& points) {
  NormalizeTransform tf;
  if (points.empty()) return tf;
  Vec3 c{0.0, 0.0, 0.0};
  for (const auto& p : points)
    for (int k = 0; k < 3; ++k) c[k] += p[k];
  for (int k = 0; k < 3; ++k) c[k] /= static_cast<double>(points.size());
  double r2 = 0.0;
  for (auto& p : points) {
    for (int k = 0; k < 3; ++k) p[k] -= c[k];
    r2 = std::max(r2, p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  }
  const double r = std::sqrt(r2);
  if (r > 0.0) {
    for (auto& p : points)
      for (int k = 0; k < 3; ++k) p[k] /= r;
  }
  tf.centroid = c;
  tf.scale = r > 0.0 ? r : 1.0;
  return tf;
}

PointCloud make_cloud(std::string id, std::vector<Vec3> raw_points, NormalizeTransform* applied) {
  if (raw_points.size() < kMinCloudPoints) {
    throw ValidationError("point cloud '" + id + "' has " + std::to_string(raw_points.size()) +
                          " points; at least " + std::to_string(kMinCloudPoints) + " required");
  }
  for (const auto& p : raw_points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw ValidationError("point cloud '" + id + "' contains a non-finite coordinate");
    }
  }
  NormalizeTransform tf = normalize_points(raw_points);
  bool spread = false;
  for (const auto& p : raw_points) spread = spread || (p[0] != 0.0 || p[1] != 0.0 || p[2] != 0.0);
  if (!spread) throw ValidationError("point cloud '" + id + "' has all points coincident");
  if (applied) *applied = tf;
  return PointCloud{std::move(id), std::move(raw_points)};
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  // std::from_chars for double is available in libstdc++ 11.
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view strip_comment(std::string_view line) {
  const auto pos = line.find('#');
  return pos == std::string_view::npos ? line : line.substr(0, pos);
}

}  // namespace

LoadedCloud load_pointcloud(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open point cloud '" + path.string() + "'");
  if (id.empty()) id = path.stem().string();
  std::vector<Vec3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(strip_comment(line));
    if (toks.empty()) continue;
    if (toks.size() != 3) {
      throw ParseError(path.string(), lineno, "expected 3 numeric fields, got " + std::to_string(toks.size()));
    }
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      if (!parse_double(toks[k], p[k])) {
        throw ParseError(path.string(), lineno, "not a number: '" + std::string(toks[k]) + "'");
      }
    }
    pts.push_back(p);
  }
  LoadedCloud out;
  out.cloud = make_cloud(std::move(id), std::move(pts), &out.transform);
  return out;
}

void save_pointcloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out << buf;
  }
}

std::size_t BinaryMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

std::vector<std::size_t> BinaryMask::foreground() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> BinaryMask::background() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (!flags[i]) out.push_back(i);
  return out;
}

std::vector<int> KWayLabeling::labels_used() const {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void KWayLabeling::validate() const {
  if (k_bound < 1) throw ValidationError("labeling: k_bound must be positive");
  for (int l : labels) {
    if (l < 0 || l >= k_bound) {
      throw ValidationError("labeling: label " + std::to_string(l) + " outside [0, " + std::to_string(k_bound) + ")");
    }
  }
}

BinaryMask mask_for_label(const KWayLabeling& labeling, int label) {
  BinaryMask m;
  m.flags.resize(labeling.size());
  for (std::size_t i = 0; i < labeling.size(); ++i) m.flags[i] = labeling.labels[i] == label ? 1 : 0;
  return m;
}

void save_labeling(const KWayLabeling& labeling, const std::filesystem::path& path) {
  labeling.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  std::string buf;
  buf.reserve(labeling.size() * 3);
  for (int l : labeling.labels) {
    buf += std::to_string(l);
    buf += '\n';
  }
  out << buf;
}

KWayLabeling load_labeling(const std::filesystem::path& path, std::optional<int> k_bound) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open label file '" + path.string() + "'");
  KWayLabeling out;
  std::string line;
  std::size_t lineno = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(toks[0].data(), toks[0].data() + toks[0].size(), v);
    if (toks.size() != 1 || ec != std::errc() || ptr != toks[0].data() + toks[0].size()) {
      throw ParseError(path.string(), lineno, "expected a single integer label");
    }
    if (v < 0) throw ParseError(path.string(), lineno, "negative label " + std::to_string(v));
    max_label = std::max(max_label, v);
    out.labels.push_back(v);
  }
  out.k_bound = k_bound.value_or(max_label + 1);
  if (out.k_bound < 1) out.k_bound = 1;
  out.validate();
  return out;
}

void check_aligned(const PointCloud& cloud, const KWayLabeling& labeling) {
  if (cloud.size() != labeling.size()) {
    throw ValidationError("labeling has " + std::to_string(labeling.size()) + " entries but cloud '" + cloud.id +
                          "' has " + std::to_string(cloud.size()) + " points");
  }
}

void ShapeSet::validate() const {
  if (shapes.size() < 2) throw ValidationError("shape set needs at least 2 shapes");
  if (!ground_truth.empty() && ground_truth.size() != shapes.size()) {
    throw ValidationError("shape set: ground truth count does not match shape count");
  }
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (ground_truth[i]) check_aligned(shapes[i], *ground_truth[i]);
  }
}

}  // namespace groupseg
