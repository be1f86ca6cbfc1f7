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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "groupseg/encoders.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

inline constexpr int kCheckpointVersion = 1;

/// Named tensors plus string metadata. Text format, version-tagged:
///   groupseg-checkpoint <version>
///   meta <key> <value>
///   tensor <name> <rank> <dims...>
///   <values>
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_encoder(Checkpoint& ckpt, const std::string& prefix, const EncoderWeights& weights);
EncoderWeights read_encoder(const Checkpoint& ckpt, const std::string& prefix);

void write_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& net);
Mlp read_mlp(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace groupseg
