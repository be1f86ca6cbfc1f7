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

#include "groupseg/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "groupseg/error.hpp"
#include "json.hpp"

namespace groupseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": invalid JSON: " + e.what());
  }
}

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ValidationError(where_ + ": missing required key '" + key + "'");
    return as<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.contains(k)) throw ValidationError(where_ + ": unknown key '" + k + "'");
  }

  const std::string& where() const { return where_; }

 private:
  template <typename T>
  T as(const std::string& key) const {
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      return v.get<T>();
    } catch (const std::exception& e) {
      throw ValidationError(where_ + ": key '" + key + "': " + e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

SynthSpec parse_synth_spec(Fields& f) {
  SynthSpec s;
  try {
    s.family = parse_family(f.require<std::string>("family"));
  } catch (const ValidationError& e) {
    throw ValidationError(f.where() + ": " + e.what());
  }
  s.n_points = f.get<std::size_t>("n_points", s.n_points);
  s.with_arms = f.get<bool>("with_arms", s.with_arms);
  s.jitter = f.get<double>("jitter", s.jitter);
  return s;
}

SynthManifest parse_synth(const json& j, const std::string& where) {
  Fields top(j, where);
  SynthManifest m;
  if (top.has("shapes")) {
    const json& shapes = top.raw("shapes");
    if (!shapes.is_array()) throw ValidationError(where + ": 'shapes' must be an array");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      Fields f(shapes[i], where + ".shapes[" + std::to_string(i) + "]");
      SynthSpec s = parse_synth_spec(f);
      s.seed = f.require<std::uint64_t>("seed");
      s.id = f.require<std::string>("id");
      f.finish();
      m.shapes.push_back(std::move(s));
    }
  }
  if (top.has("groups")) {
    const json& groups = top.raw("groups");
    if (!groups.is_array()) throw ValidationError(where + ": 'groups' must be an array");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      Fields f(groups[i], where + ".groups[" + std::to_string(i) + "]");
      SynthSpec base = parse_synth_spec(f);
      const auto count = f.require<std::size_t>("count");
      const auto seed = f.require<std::uint64_t>("seed");
      const auto prefix = f.get<std::string>("id_prefix", family_name(base.family));
      f.finish();
      for (std::size_t c = 0; c < count; ++c) {
        SynthSpec s = base;
        s.seed = seed + c;
        char buf[32];
        std::snprintf(buf, sizeof buf, "_%03zu", c);
        s.id = prefix + buf;
        m.shapes.push_back(std::move(s));
      }
    }
  }
  top.finish();
  m.validate();
  return m;
}

}  // namespace

void SynthManifest::validate() const {
  if (shapes.empty()) throw ValidationError("synth manifest: no shapes");
  std::set<std::string> ids;
  for (const auto& s : shapes) {
    s.validate();
    if (s.id.empty()) throw ValidationError("synth manifest: empty shape id");
    if (s.id.find_first_of("/\\") != std::string::npos) throw ValidationError("synth manifest: id '" + s.id + "' contains a path separator");
    if (!ids.insert(s.id).second) throw ValidationError("synth manifest: duplicate id '" + s.id + "'");
  }
}

SynthManifest parse_synth_manifest(const std::string& json_text, const std::string& origin) {
  return parse_synth(parse_json(json_text, origin), origin);
}

SynthManifest load_synth_manifest(const fs::path& path) {
  return parse_synth_manifest(read_text(path), path.string());
}

SetManifest load_set_manifest(const fs::path& path) {
  const json j = parse_json(read_text(path), path.string());
  const fs::path base = path.parent_path();
  Fields top(j, path.string());
  const json& shapes = top.raw("shapes");
  top.finish();
  if (!shapes.is_array() || shapes.empty()) throw ValidationError(path.string() + ": 'shapes' must be a non-empty array");
  SetManifest m;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Fields f(shapes[i], path.string() + ".shapes[" + std::to_string(i) + "]");
    SetEntry e;
    e.id = f.require<std::string>("id");
    e.points = resolve(base, f.require<std::string>("points"));
    if (f.has("labels")) e.labels = resolve(base, f.require<std::string>("labels"));
    f.finish();
    if (!ids.insert(e.id).second) throw ValidationError(path.string() + ": duplicate id '" + e.id + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_set_manifest(const SetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) {
    std::error_code ec;
    fs::path r = fs::relative(p, base, ec);
    return (ec || r.empty()) ? p.generic_string() : r.generic_string();
  };
  json shapes = json::array();
  for (const auto& e : manifest.entries) {
    json s = {{"id", e.id}, {"points", rel(e.points)}};
    if (e.labels) s["labels"] = rel(*e.labels);
    shapes.push_back(std::move(s));
  }
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << json{{"shapes", shapes}}.dump(2) << "\n";
}

SetManifest write_synth_set(const SynthManifest& manifest, const fs::path& dir) {
  manifest.validate();
  fs::create_directories(dir);
  SetManifest set;
  for (const auto& spec : manifest.shapes) {
    SynthShape shape = synth_shape(spec);
    SetEntry e{spec.id, dir / (spec.id + ".xyz"), dir / (spec.id + ".labels")};
    save_pointcloud(shape.cloud, e.points);
    save_labeling(shape.ground_truth, *e.labels);
    set.entries.push_back(std::move(e));
  }
  save_set_manifest(set, dir / "set.json");
  return set;
}

ShapeSet load_shape_set(const SetManifest& manifest) {
  ShapeSet set;
  for (const auto& e : manifest.entries) {
    LoadedCloud loaded = load_pointcloud(e.points, e.id);
    std::optional<KWayLabeling> gt;
    if (e.labels) {
      gt = load_labeling(*e.labels);
      check_aligned(loaded.cloud, *gt);
    }
    set.shapes.push_back(std::move(loaded.cloud));
    set.ground_truth.push_back(std::move(gt));
  }
  set.validate();
  return set;
}

std::vector<PartExample> load_part_dataset(const SetManifest& manifest) {
  std::vector<PartExample> data;
  for (const auto& e : manifest.entries) {
    if (!e.labels) throw ValidationError("training shape '" + e.id + "' has no labels file");
    LoadedCloud loaded = load_pointcloud(e.points, e.id);
    KWayLabeling labels = load_labeling(*e.labels);
    check_aligned(loaded.cloud, labels);
    PartExample ex{std::move(loaded.cloud), part_masks(labels)};
    if (ex.parts.empty()) throw ValidationError("training shape '" + e.id + "' has no usable part");
    data.push_back(std::move(ex));
  }
  if (data.empty()) throw ValidationError("training set is empty");
  return data;
}

namespace {

bool is_set_manifest(const fs::path& path) {
  const json j = parse_json(read_text(path), path.string());
  if (!j.is_object() || !j.contains("shapes") || !j["shapes"].is_array()) return false;
  for (const auto& s : j["shapes"])
    if (s.is_object() && s.contains("points")) return true;
  return false;
}

}  // namespace

ShapeSet load_any_shape_set(const fs::path& path) {
  if (is_set_manifest(path)) return load_shape_set(load_set_manifest(path));
  const SynthManifest m = load_synth_manifest(path);
  ShapeSet set;
  for (const auto& spec : m.shapes) {
    SynthShape shape = synth_shape(spec);
    set.shapes.push_back(std::move(shape.cloud));
    set.ground_truth.push_back(std::move(shape.ground_truth));
  }
  set.validate();
  return set;
}

std::vector<PartExample> load_any_part_dataset(const fs::path& path) {
  if (is_set_manifest(path)) return load_part_dataset(load_set_manifest(path));
  const SynthManifest m = load_synth_manifest(path);
  std::vector<PartExample> data;
  for (const auto& spec : m.shapes) {
    SynthShape shape = synth_shape(spec);
    data.push_back({std::move(shape.cloud), part_masks(shape.ground_truth)});
  }
  return data;
}

void ExperimentManifest::validate() const {
  if (name.empty()) throw ValidationError("experiment manifest: empty name");
  if (output_dir.empty()) throw ValidationError("experiment manifest: empty output_dir");
  if (!prior_checkpoint) prior_data.validate();
  coseg_set.validate();
  if (coseg_set.shapes.size() < 2) throw ValidationError("experiment manifest: coseg set needs at least 2 shapes");
  coseg.validate();
}

ExperimentManifest parse_experiment_manifest(const std::string& json_text, const fs::path& base_dir,
                                             const std::string& origin) {
  const json j = parse_json(json_text, origin);
  Fields top(j, origin);
  ExperimentManifest m;
  m.name = top.require<std::string>("name");
  m.output_dir = resolve(base_dir, top.require<std::string>("output_dir"));
  m.evaluate = top.get<bool>("evaluate", true);

  Fields prior(top.raw("prior"), origin + ".prior");
  if (prior.has("checkpoint")) {
    m.prior_checkpoint = resolve(base_dir, prior.require<std::string>("checkpoint"));
  } else {
    m.prior_data = parse_synth(prior.raw("data"), origin + ".prior.data");
    auto& t = m.prior_train;
    t.steps = prior.get<std::size_t>("steps", t.steps);
    t.batch = prior.get<std::size_t>("batch", t.batch);
    t.seed = prior.get<std::uint64_t>("seed", t.seed);
    t.adam.learning_rate = prior.get<double>("learning_rate", t.adam.learning_rate);
    t.cosine_decay = prior.get<bool>("cosine_decay", t.cosine_decay);
    t.rate_lo = prior.get<double>("rate_lo", t.rate_lo);
    t.rate_hi = prior.get<double>("rate_hi", t.rate_hi);
    t.encoder.neighbor_cap = prior.get<std::size_t>("neighbor_cap", t.encoder.neighbor_cap);
    t.log_every = prior.get<std::size_t>("log_every", t.log_every);
  }
  prior.finish();

  Fields coseg(top.raw("coseg"), origin + ".coseg");
  m.coseg_set = parse_synth(coseg.raw("set"), origin + ".coseg.set");
  auto& c = m.coseg;
  c.k = coseg.require<int>("k");
  c.seed = coseg.get<std::uint64_t>("seed", c.seed);
  c.max_iters = coseg.get<std::size_t>("iters", c.max_iters);
  c.lambda = coseg.get<double>("lambda", c.lambda);
  c.learning_rate = coseg.get<double>("learning_rate", c.learning_rate);
  c.ablation = parse_ablation(coseg.get<std::string>("ablation", "none"));
  coseg.finish();
  top.finish();
  m.validate();
  return m;
}

ExperimentManifest load_experiment_manifest(const fs::path& path) {
  return parse_experiment_manifest(read_text(path), path.parent_path(), path.string());
}

}  // namespace groupseg
