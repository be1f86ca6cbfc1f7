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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace groupseg {

/// One labeled part descriptor.
struct LabeledDescriptor {
  std::vector<double> descriptor;
  int label = 0;
};

struct RankProbeConfig {
  /// Label-subset sizes to probe; empty means every non-empty proper subset.
  std::vector<std::size_t> subset_sizes;
  std::size_t samples_per_subset = 50;
  /// Each collection draws this many parts from every label in its subset,
  /// so collections grow with the number of labels they mix.
  std::size_t parts_per_label = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct RankProbeRow {
  std::size_t distinct_labels = 0;
  std::vector<int> subset;
  std::size_t sample_index = 0;
  double sigma2 = 0.0;  // σ₂ of the stacked collection
  double mse = 0.0;     // mean squared distance of rows to their mean
};

struct RankProbeSummary {
  std::size_t distinct_labels = 0;
  std::size_t samples = 0;
  double sigma2_min = 0.0, sigma2_max = 0.0;
  double mse_min = 0.0, mse_max = 0.0;
};

struct RankProbeReport {
  std::vector<RankProbeRow> rows;
  std::vector<RankProbeSummary> summary;  // ascending distinct_labels
  std::vector<std::string> notes;

  const RankProbeSummary* for_count(std::size_t distinct_labels) const;
};

/// Samples labeled part collections per label subset and scores each by σ₂
/// and by the naive MSE spread. Deterministic in config.seed.
RankProbeReport rank_probe(const std::vector<LabeledDescriptor>& parts, const RankProbeConfig& config);

/// Mean squared Euclidean distance of rows to their centroid.
double mse_spread(const std::vector<std::vector<double>>& rows);

/// Unit vectors in `dim` dimensions whose pairwise angles (degrees) are
/// angles[i][j]. Throws if the angles are not realizable.
std::vector<std::vector<double>> unit_vectors_with_angles(const std::vector<std::vector<double>>& angles_deg,
                                                          std::size_t dim);

/// `per_cluster` unit descriptors per center, each at most max_angle_deg
/// from its center (so pairwise within a cluster ≤ 2·max_angle_deg); the
/// label is the center index.
std::vector<LabeledDescriptor> cluster_descriptors(const std::vector<std::vector<double>>& centers,
                                                   std::size_t per_cluster, double max_angle_deg, std::uint64_t seed);

void write_rank_probe_csv(const RankProbeReport& report, const std::filesystem::path& path);

}  // namespace groupseg
