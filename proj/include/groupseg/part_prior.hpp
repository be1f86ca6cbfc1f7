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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "groupseg/adam.hpp"
#include "groupseg/autodiff.hpp"
#include "groupseg/corruption.hpp"
#include "groupseg/encoders.hpp"
#include "groupseg/mlp.hpp"
#include "groupseg/pointcloud.hpp"

namespace groupseg {

/// Point-wise classifier on [f_MRG(q), f_fg] → 2 logits (background, foreground).
/// The first layer's 256×128 weight is stored as its two 128×128 halves.
struct PriorClassifier {
  Tensor point_weight;  // rows acting on f_MRG(q)
  Tensor fg_weight;     // rows acting on f_fg
  Tensor bias;
  Mlp tail;             // 128 → 128 (ReLU) → 2

  std::vector<Tensor*> parameters();
  void set_requires_grad(bool on);
  void validate() const;
};

struct PriorWeights {
  EncoderWeights msg;
  EncoderWeights mrg;
  PriorClassifier classifier;

  std::vector<Tensor*> parameters();
  void set_requires_grad(bool on);
  void validate() const;
};

PriorWeights make_prior(const EncoderConfig& config, std::uint64_t seed);
void save_prior(const PriorWeights& weights, const std::filesystem::path& path);
PriorWeights load_prior(const std::filesystem::path& path);

/// Frozen per-shape encoder outputs.
struct ShapeEncoding {
  CloudGroups groups;
  Tensor msg;  // n × 128
  Tensor mrg;  // n × 128
};

ShapeEncoding encode_shape(const PointCloud& cloud, PriorWeights& weights);

/// Mean of MSG rows weighted by a per-point mask (n×1). Differentiable in both.
Var foreground_descriptor(Var msg_field, Var mask_weights);
/// 128-D f_fg; throws EmptyForegroundError on an empty foreground.
Tensor foreground_descriptor(const PointCloud& cloud, const BinaryMask& mask, PriorWeights& weights);

/// n×2 classifier logits for one foreground descriptor. `point_term` is
/// f_MRG·point_weight (n×128), which callers with frozen weights precompute.
Var prior_logits(Var point_term, Var fg_descriptor, PriorClassifier& classifier);
Var prior_point_term(Var mrg_field, PriorClassifier& classifier);

/// Per-point foreground probability. An empty foreground yields all zeros.
std::vector<double> denoise(const PointCloud& cloud, const BinaryMask& noisy_mask, PriorWeights& weights);
std::vector<double> denoise(const ShapeEncoding& enc, const BinaryMask& noisy_mask, PriorWeights& weights);

/// One training shape and its clean part masks (any granularity).
struct PartExample {
  PointCloud cloud;
  std::vector<BinaryMask> parts;
};

/// All ground-truth groups of a labeling that leave a non-empty background.
std::vector<BinaryMask> part_masks(const KWayLabeling& labeling);

struct PriorTrainConfig {
  std::size_t steps = 5000;
  /// Masks per step, all drawn from one shape so they share its encoding.
  std::size_t batch = 8;
  AdamConfig adam{.learning_rate = 3e-3};
  /// Cosine-anneal the learning rate from adam.learning_rate down to
  /// final_lr_fraction of it over the run.
  bool cosine_decay = true;
  double final_lr_fraction = 0.05;
  /// Insertion and deletion rates are each drawn uniformly from this range
  /// per training example.
  double rate_lo = 0.20;
  double rate_hi = 0.30;
  EncoderConfig encoder{};
  std::uint64_t seed = 1;
  std::size_t log_every = 250;
  std::size_t validation_masks = 16;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct PriorTrainResult {
  PriorWeights weights;
  std::vector<TrainLogEntry> curve;
};

using ProgressFn = std::function<void(const TrainLogEntry&)>;

/// Denoising training loop: corrupt a clean mask, predict the clean mask,
/// NLL + Adam on all prior parameters. Deterministic in config.seed.
PriorTrainResult train_prior(const std::vector<PartExample>& dataset, const PriorTrainConfig& config,
                             const ProgressFn& progress = {});
/// Continue training from given weights.
PriorTrainResult train_prior(PriorWeights initial, const std::vector<PartExample>& dataset,
                             const PriorTrainConfig& config, const ProgressFn& progress = {});

/// Fraction of points whose thresholded (0.5) prediction matches the clean mask.
double denoise_accuracy(const std::vector<double>& probabilities, const BinaryMask& clean);

}  // namespace groupseg
