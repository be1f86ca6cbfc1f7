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

#include "groupseg/rank_probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include <Eigen/Dense>
#include <random>

#include "groupseg/error.hpp"
#include "groupseg/linalg.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

void RankProbeConfig::validate() const {
  if (samples_per_subset == 0) throw ValidationError("rank probe: samples per subset must be positive");
  if (parts_per_label == 0) throw ValidationError("rank probe: parts per label must be positive");
  for (auto s : subset_sizes)
    if (s == 0) throw ValidationError("rank probe: subset sizes must be positive");
}

const RankProbeSummary* RankProbeReport::for_count(std::size_t distinct_labels) const {
  for (const auto& s : summary)
    if (s.distinct_labels == distinct_labels) return &s;
  return nullptr;
}

double mse_spread(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return 0.0;
  const std::size_t d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  double total = 0.0;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) total += (r[j] - mean[j]) * (r[j] - mean[j]);
  return total / static_cast<double>(rows.size());
}

namespace {

// All subsets of `labels` with `size` elements, in lexicographic order.
void subsets_of(const std::vector<int>& labels, std::size_t size, std::size_t from, std::vector<int>& cur,
                std::vector<std::vector<int>>& out) {
  if (cur.size() == size) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = from; i < labels.size(); ++i) {
    cur.push_back(labels[i]);
    subsets_of(labels, size, i + 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace

RankProbeReport rank_probe(const std::vector<LabeledDescriptor>& parts, const RankProbeConfig& config) {
  config.validate();
  std::map<int, std::vector<std::size_t>> by_label;
  std::size_t width = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.descriptor.empty()) throw ValidationError("rank probe: empty descriptor");
    if (width == 0) width = p.descriptor.size();
    if (p.descriptor.size() != width) throw ValidationError("rank probe: descriptor widths differ");
    for (double v : p.descriptor)
      if (!std::isfinite(v)) throw ValidationError("rank probe: non-finite descriptor");
    by_label[p.label].push_back(i);
  }
  if (by_label.size() < 3) throw ValidationError("rank probe: need descriptors for at least 3 distinct labels");
  std::vector<int> labels;
  for (const auto& [l, _] : by_label) labels.push_back(l);

  std::vector<std::size_t> sizes = config.subset_sizes;
  if (sizes.empty())
    for (std::size_t s = 1; s < labels.size(); ++s) sizes.push_back(s);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  RankProbeReport report;
  std::mt19937_64 rng(config.seed);
  for (std::size_t size : sizes) {
    if (size > labels.size()) {
      report.notes.push_back("skipped subsets of size " + std::to_string(size) + ": only " +
                             std::to_string(labels.size()) + " labels present");
      continue;
    }
    std::vector<std::vector<int>> subsets;
    std::vector<int> cur;
    subsets_of(labels, size, 0, cur, subsets);
    RankProbeSummary sum;
    sum.distinct_labels = size;
    for (const auto& subset : subsets) {
      for (std::size_t sample = 0; sample < config.samples_per_subset; ++sample) {
        std::vector<std::vector<double>> rows;
        for (int l : subset) {
          auto pool = by_label[l];
          // Without replacement while the pool lasts, then with replacement.
          std::shuffle(pool.begin(), pool.end(), rng);
          for (std::size_t j = 0; j < config.parts_per_label; ++j) {
            const std::size_t pick =
                j < pool.size() ? pool[j] : pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            rows.push_back(parts[pick].descriptor);
          }
        }
        RankProbeRow row;
        row.distinct_labels = size;
        row.subset = subset;
        row.sample_index = sample;
        row.sigma2 = second_singular_value(Tensor::from_rows(rows));
        row.mse = mse_spread(rows);
        if (sum.samples == 0) {
          sum.sigma2_min = sum.sigma2_max = row.sigma2;
          sum.mse_min = sum.mse_max = row.mse;
        } else {
          sum.sigma2_min = std::min(sum.sigma2_min, row.sigma2);
          sum.sigma2_max = std::max(sum.sigma2_max, row.sigma2);
          sum.mse_min = std::min(sum.mse_min, row.mse);
          sum.mse_max = std::max(sum.mse_max, row.mse);
        }
        ++sum.samples;
        report.rows.push_back(std::move(row));
      }
    }
    report.summary.push_back(sum);
  }
  return report;
}

std::vector<std::vector<double>> unit_vectors_with_angles(const std::vector<std::vector<double>>& angles_deg,
                                                          std::size_t dim) {
  const std::size_t k = angles_deg.size();
  if (k == 0 || dim < k) throw ValidationError("unit_vectors_with_angles: need 0 < count <= dim");
  Eigen::MatrixXd gram(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (angles_deg[i].size() != k) throw ValidationError("unit_vectors_with_angles: angle matrix must be square");
    for (std::size_t j = 0; j < k; ++j)
      gram(i, j) = i == j ? 1.0 : std::cos(angles_deg[i][j] * std::numbers::pi / 180.0);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw ValidationError("unit_vectors_with_angles: angles are not realizable");
  const Eigen::MatrixXd l = llt.matrixL();
  std::vector<std::vector<double>> out(k, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j <= i; ++j) out[i][j] = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

std::vector<LabeledDescriptor> cluster_descriptors(const std::vector<std::vector<double>>& centers,
                                                   std::size_t per_cluster, double max_angle_deg, std::uint64_t seed) {
  if (!(max_angle_deg >= 0.0 && max_angle_deg < 90.0)) throw ValidationError("cluster_descriptors: bad angle");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, max_angle_deg * std::numbers::pi / 180.0);
  std::vector<LabeledDescriptor> out;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const auto& center = centers[c];
    const std::size_t d = center.size();
    if (d < 2) throw ValidationError("cluster_descriptors: need at least 2 dimensions");
    for (std::size_t s = 0; s < per_cluster; ++s) {
      // Random direction orthogonal to the center, then rotate by θ toward it.
      std::vector<double> u(d);
      double dot = 0.0, norm = 0.0;
      do {
        for (auto& v : u) v = gauss(rng);
        dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += u[j] * center[j];
        norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          u[j] -= dot * center[j];
          norm += u[j] * u[j];
        }
      } while (norm < 1e-12);
      const double theta = angle(rng);
      LabeledDescriptor ld;
      ld.label = static_cast<int>(c);
      ld.descriptor.resize(d);
      for (std::size_t j = 0; j < d; ++j)
        ld.descriptor[j] = std::cos(theta) * center[j] + std::sin(theta) * u[j] / std::sqrt(norm);
      out.push_back(std::move(ld));
    }
  }
  return out;
}

void write_rank_probe_csv(const RankProbeReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write rank probe report to " + path.string());
  out << "distinct_labels,subset,sample_index,sigma2,mse\n";
  char buf[128];
  for (const auto& r : report.rows) {
    std::string subset;
    for (std::size_t i = 0; i < r.subset.size(); ++i) subset += (i ? "|" : "") + std::to_string(r.subset[i]);
    std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g\n", r.sample_index, r.sigma2, r.mse);
    out << r.distinct_labels << ',' << subset << buf;
  }
}

}  // namespace groupseg
