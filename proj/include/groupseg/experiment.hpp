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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "groupseg/coseg.hpp"
#include "groupseg/manifest.hpp"
#include "groupseg/metrics.hpp"
#include "groupseg/rank_probe.hpp"

namespace groupseg {

/// Writes <dir>/labels/<id>.labels per shape, <dir>/energy.csv and
/// <dir>/run.json (hyperparameters, status, energies).
void write_coseg_outputs(const CosegResult& result, const std::vector<std::string>& ids, const CosegConfig& config,
                         const std::filesystem::path& dir);

struct ShapeScore {
  std::string id;
  RandIndexReport rand_index;
  double mapped_accuracy = 0.0;
};

/// Pairs <id>.labels files present in both directories.
std::vector<ShapeScore> evaluate_label_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);
double mean_rand_index(const std::vector<ShapeScore>& scores);

/// Descriptor of every ground-truth part (≥ min_points points) of every
/// shape, labeled by its ground-truth label.
std::vector<LabeledDescriptor> ground_truth_part_descriptors(const ShapeSet& set, const PriorWeights& prior,
                                                             std::size_t min_points = 5);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ExperimentSummary {
  std::string name;
  bool complete = false;
  std::string failed_stage;
  std::string error;
  std::vector<StageTiming> timings;
  std::vector<ShapeScore> scores;
  double mean_rand_index = 0.0;
  std::string coseg_status;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  std::vector<int> labels_used;
};

/// synth → train-prior (or load) → coseg → eval under manifest.output_dir.
/// A marker file INCOMPLETE exists while stages run and stays behind on
/// failure; summary.json / summary.txt are always written. Stage errors are
/// rethrown after the summary is written.
ExperimentSummary run_experiment(const ExperimentManifest& manifest, std::ostream* log = nullptr);

}  // namespace groupseg
