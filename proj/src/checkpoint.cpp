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

#include "groupseg/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "groupseg/error.hpp"

namespace groupseg {

namespace {

constexpr const char* kMagic = "groupseg-checkpoint";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("checkpoint: meta '" + key + "' is not a number: " + s);
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw ValidationError("checkpoint: missing tensor '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw ValidationError("checkpoint: missing meta '" + key + "'");
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint '" + path.string() + "'");
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, t] : ckpt.tensors) {
    out << "tensor " << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << fmt_double(t[i]);
    out << '\n';
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw ValidationError("'" + path.string() + "' is not a groupseg checkpoint");
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  Checkpoint ckpt;
  std::string tag;
  while (in >> tag) {
    if (tag == "meta") {
      std::string key, value;
      in >> key;
      std::getline(in >> std::ws, value);
      ckpt.meta[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      std::size_t rank = 0;
      in >> name >> rank;
      Shape shape(rank);
      for (auto& d : shape) in >> d;
      std::vector<double> values(shape_size(shape));
      for (auto& v : values) {
        if (!(in >> v)) throw ValidationError("checkpoint: truncated tensor '" + name + "'");
      }
      ckpt.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
    } else {
      throw ValidationError("checkpoint: unexpected record '" + tag + "'");
    }
  }
  return ckpt;
}

void write_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& net) {
  ckpt.meta[prefix + ".layers"] = std::to_string(net.size());
  for (std::size_t l = 0; l < net.size(); ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    ckpt.meta[p + ".relu"] = net[l].activation == Activation::kRelu ? "1" : "0";
    ckpt.tensors.emplace_back(p + ".weight", net[l].weight);
    ckpt.tensors.emplace_back(p + ".bias", net[l].bias);
  }
}

Mlp read_mlp(const Checkpoint& ckpt, const std::string& prefix) {
  const auto layers = static_cast<std::size_t>(to_double(ckpt.meta_value(prefix + ".layers"), prefix + ".layers"));
  Mlp net;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    DenseLayer layer{ckpt.tensor(p + ".weight"), ckpt.tensor(p + ".bias"),
                     ckpt.meta_value(p + ".relu") == "1" ? Activation::kRelu : Activation::kNone};
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    net.push_back(std::move(layer));
  }
  return net;
}

void write_encoder(Checkpoint& ckpt, const std::string& prefix, const EncoderWeights& weights) {
  ckpt.meta[prefix + ".kind"] = weights.kind == FeatureKind::kMsg ? "msg" : "mrg";
  for (std::size_t s = 0; s < 3; ++s) ckpt.meta[prefix + ".radius" + std::to_string(s)] = fmt_double(weights.config.radii[s]);
  ckpt.meta[prefix + ".hidden"] = std::to_string(weights.config.hidden);
  ckpt.meta[prefix + ".hidden_layers"] = std::to_string(weights.config.hidden_layers);
  ckpt.meta[prefix + ".neighbor_cap"] = std::to_string(weights.config.neighbor_cap);
  ckpt.meta[prefix + ".sample_seed"] = std::to_string(weights.config.sample_seed);
  ckpt.meta[prefix + ".nets"] = std::to_string(weights.nets.size());
  for (std::size_t i = 0; i < weights.nets.size(); ++i) write_mlp(ckpt, prefix + ".net" + std::to_string(i), weights.nets[i]);
}

EncoderWeights read_encoder(const Checkpoint& ckpt, const std::string& prefix) {
  EncoderWeights w;
  const auto& kind = ckpt.meta_value(prefix + ".kind");
  if (kind != "msg" && kind != "mrg") throw ValidationError("checkpoint: unknown encoder kind '" + kind + "'");
  w.kind = kind == "msg" ? FeatureKind::kMsg : FeatureKind::kMrg;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string key = prefix + ".radius" + std::to_string(s);
    w.config.radii[s] = to_double(ckpt.meta_value(key), key);
  }
  w.config.hidden = std::stoul(ckpt.meta_value(prefix + ".hidden"));
  w.config.hidden_layers = std::stoul(ckpt.meta_value(prefix + ".hidden_layers"));
  w.config.neighbor_cap = std::stoul(ckpt.meta_value(prefix + ".neighbor_cap"));
  w.config.sample_seed = std::stoull(ckpt.meta_value(prefix + ".sample_seed"));
  const auto nets = std::stoul(ckpt.meta_value(prefix + ".nets"));
  for (std::size_t i = 0; i < nets; ++i) w.nets.push_back(read_mlp(ckpt, prefix + ".net" + std::to_string(i)));
  w.validate();
  return w;
}

}  // namespace groupseg
