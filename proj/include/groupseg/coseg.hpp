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
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "groupseg/autodiff.hpp"
#include "groupseg/mlp.hpp"
#include "groupseg/part_prior.hpp"
#include "groupseg/pointcloud.hpp"

namespace groupseg {

enum class Ablation {
  kNone,
  kNoPrior,          // classifier logits bypass refinement
  kNoContrastive,    // energy keeps only 1 + max_i σ₂(M_i)
  kNoCompleteness,   // λ = 0
  kMrgParts,         // part descriptors pool MRG instead of MSG
};

Ablation parse_ablation(std::string_view name);
std::string ablation_name(Ablation a);

struct CosegConfig {
  int k = 3;
  double lambda = 1.0;  // completeness weight
  std::size_t max_iters = 300;
  double learning_rate = 1e-2;
  std::size_t hidden = 64;
  /// Gain on the last classifier layer at initialization; large enough that
  /// every label wins the 0.5 threshold somewhere.
  double init_gain = 4.0;
  std::size_t batch_size = 8;
  std::size_t batch_stride = 4;
  /// Sets up to this size are optimized as a single batch.
  std::size_t full_set_limit = 16;
  double stop_tolerance = 1e-4;
  std::size_t stop_window = 20;
  std::size_t min_part_points = 5;
  std::size_t collapse_window = 20;
  double mask_threshold = 0.5;
  /// true: the 0.5 threshold passes gradients straight through;
  /// false: it is treated as a constant.
  bool straight_through = true;
  /// Weight of the classifier's own logits next to the prior's log-odds in
  /// the recomposed map.
  double logit_weight = 0.0;
  /// Logit column given to labels whose thresholded mask is empty.
  double dead_label_logit = -30.0;
  Ablation ablation = Ablation::kNone;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Trainable point-wise classifier: standardized f_MRG (128) → K logits.
struct CosegWeights {
  Mlp net;
  int k = 0;

  std::vector<Tensor*> parameters();
};

CosegWeights make_coseg_weights(int k, std::size_t hidden, double init_gain, std::mt19937_64& rng);

/// Frozen per-shape quantities; computed once per set.
struct PreparedShape {
  std::string id;
  Tensor msg;         // n × 128
  Tensor mrg;         // n × 128
  Tensor input;       // standardized MRG, classifier input
  Tensor point_term;  // f_MRG · prior point weight, n × 128
};

/// Encodes every shape with the prior's encoders and standardizes MRG
/// features with statistics pooled over the whole set.
std::vector<PreparedShape> prepare_shapes(const std::vector<PointCloud>& shapes, const PriorWeights& prior);

/// n × K logits.
Var classify_kway(Var input, CosegWeights& weights);
Tensor classify_kway(const PointCloud& cloud, const PriorWeights& prior, CosegWeights& weights);

/// n × K probability map: per label, the 0.5-thresholded soft weight
/// conditions the frozen prior; its foreground log-odds are added to the
/// label's logit and a row softmax resolves overlaps. Labels with an empty
/// mask get a constant dead_label_logit column.
Var refine_and_recompose(Var logits, Var msg, Var point_term, const PriorClassifier& prior, const CosegConfig& config);
Tensor refine_and_recompose(const PointCloud& cloud, const Tensor& logits, const PriorWeights& prior,
                            const CosegConfig& config);

/// L2-normalized column max of mask_weight · field (1 × 128).
Var part_descriptor(Var field, Var soft_mask);
/// Throws ValidationError when fewer than min_points weights are positive.
Tensor part_descriptor(const Tensor& field, const std::vector<double>& soft_mask, std::size_t min_points = 1);

/// Descriptors of every label-`label` part in a batch, one row each.
struct PartFeatureMatrix {
  int label = 0;
  Var rows;
  std::vector<std::size_t> row_shape;  // row → shape index

  std::size_t size() const { return row_shape.size(); }
};

struct ConsistencyTerms {
  Var energy;       // 1 + rank − contrastive (or 1 + rank when degenerate)
  Var rank;         // max_i σ₂(M_i)
  Var contrastive;  // min_{i<j} σ₂([M_i; M_j]); invalid when degenerate
  bool degenerate = false;
  std::size_t labels_present = 0;
};

/// Empty matrices are skipped. Requires at least one non-empty matrix.
ConsistencyTerms group_consistency_loss(const std::vector<PartFeatureMatrix>& matrices);
/// Mean over all points of 1 − max_k p[q, k].
Var completeness_loss(const std::vector<Var>& prob_maps);

struct EnergyRecord {
  std::size_t iteration = 0;
  double rank = 0.0;
  double contrastive = 0.0;
  double completeness = 0.0;
  double total = 0.0;  // the objective actually optimized

  /// 1 + rank − contrastive, regardless of ablation.
  double group_energy() const { return 1.0 + rank - contrastive; }
};

enum class CosegStatus { kConverged, kMaxIterations, kCollapsed };
std::string status_name(CosegStatus s);

struct CosegResult {
  std::vector<KWayLabeling> labelings;
  std::vector<EnergyRecord> trace;  // one record per iteration of the final attempt
  double initial_energy = 0.0;
  double final_energy = 0.0;
  std::vector<int> labels_used;  // union over shapes
  CosegStatus status = CosegStatus::kMaxIterations;
  std::size_t restarts = 0;
  std::uint64_t seed_used = 0;
  std::string diagnostics;

  bool ok() const { return status != CosegStatus::kCollapsed; }
};

/// Per-set optimization of a fresh K-way classifier against the group
/// consistency energy plus λ·completeness. The prior stays frozen.
CosegResult cosegment(const ShapeSet& set, const PriorWeights& prior, const CosegConfig& config);
CosegResult cosegment(const std::vector<PreparedShape>& shapes, const PriorWeights& prior, const CosegConfig& config);

/// Start indices of the overlapping batches used for a set of n shapes.
std::vector<std::size_t> batch_starts(std::size_t n, const CosegConfig& config);

void write_energy_trace(const std::vector<EnergyRecord>& trace, const std::filesystem::path& path);

}  // namespace groupseg
