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
#include <optional>
#include <string>
#include <vector>

#include "groupseg/coseg.hpp"
#include "groupseg/part_prior.hpp"
#include "groupseg/pointcloud.hpp"
#include "groupseg/synth.hpp"

// JSON manifests. Relative paths inside a manifest resolve against the
// manifest's own directory. Unknown keys are rejected.

namespace groupseg {

/// Shapes to synthesize. Either listed one by one ("shapes") or as seeded
/// groups ("groups": family, count, first seed, id prefix, ...), or both.
struct SynthManifest {
  std::vector<SynthSpec> shapes;

  void validate() const;
};

SynthManifest parse_synth_manifest(const std::string& json_text, const std::string& origin = "<string>");
SynthManifest load_synth_manifest(const std::filesystem::path& path);

/// A set of shapes on disk: points file plus optional ground-truth labels.
struct SetEntry {
  std::string id;
  std::filesystem::path points;
  std::optional<std::filesystem::path> labels;
};

struct SetManifest {
  std::vector<SetEntry> entries;
};

SetManifest load_set_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory where possible.
void save_set_manifest(const SetManifest& manifest, const std::filesystem::path& path);

/// Synthesizes every shape into `dir` (<id>.xyz, <id>.labels) and writes
/// dir/set.json. Returns the written manifest.
SetManifest write_synth_set(const SynthManifest& manifest, const std::filesystem::path& dir);

/// Loads and validates clouds and (when present) index-aligned labels.
ShapeSet load_shape_set(const SetManifest& manifest);
/// Training data: every shape must carry labels; parts are its label groups.
std::vector<PartExample> load_part_dataset(const SetManifest& manifest);

/// Accepts either a set manifest (entries with "points") or a synth
/// manifest, which is generated in memory.
ShapeSet load_any_shape_set(const std::filesystem::path& path);
std::vector<PartExample> load_any_part_dataset(const std::filesystem::path& path);

/// Full pipeline description for run_experiment.
struct ExperimentManifest {
  std::string name;
  std::filesystem::path output_dir;

  // Prior: either an existing checkpoint or a training stage.
  std::optional<std::filesystem::path> prior_checkpoint;
  SynthManifest prior_data;
  PriorTrainConfig prior_train;

  SynthManifest coseg_set;
  CosegConfig coseg;
  bool evaluate = true;

  void validate() const;
};

ExperimentManifest parse_experiment_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                                             const std::string& origin = "<string>");
ExperimentManifest load_experiment_manifest(const std::filesystem::path& path);

}  // namespace groupseg
