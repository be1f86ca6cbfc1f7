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

#include "groupseg/experiment.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>

#include "groupseg/error.hpp"
#include "json.hpp"

namespace groupseg {

namespace fs = std::filesystem;
using nlohmann::json;

void write_coseg_outputs(const CosegResult& result, const std::vector<std::string>& ids, const CosegConfig& config,
                         const fs::path& dir) {
  if (ids.size() != result.labelings.size()) throw ValidationError("write_coseg_outputs: id count mismatch");
  fs::create_directories(dir / "labels");
  for (std::size_t i = 0; i < ids.size(); ++i) save_labeling(result.labelings[i], dir / "labels" / (ids[i] + ".labels"));
  write_energy_trace(result.trace, dir / "energy.csv");
  json run = {
      {"k", config.k},
      {"lambda", config.lambda},
      {"iters", config.max_iters},
      {"learning_rate", config.learning_rate},
      {"seed", config.seed},
      {"seed_used", result.seed_used},
      {"restarts", result.restarts},
      {"ablation", ablation_name(config.ablation)},
      {"batch_size", config.batch_size},
      {"batch_stride", config.batch_stride},
      {"hidden", config.hidden},
      {"min_part_points", config.min_part_points},
      {"mask_threshold", config.mask_threshold},
      {"straight_through", config.straight_through},
      {"logit_weight", config.logit_weight},
      {"stop_tolerance", config.stop_tolerance},
      {"stop_window", config.stop_window},
      {"status", status_name(result.status)},
      {"initial_energy", result.initial_energy},
      {"final_energy", result.final_energy},
      {"labels_used", result.labels_used},
      {"shapes", ids},
      {"diagnostics", result.diagnostics},
  };
  std::ofstream out(dir / "run.json");
  if (!out) throw RuntimeFailure("cannot write " + (dir / "run.json").string());
  out << run.dump(2) << "\n";
}

std::vector<ShapeScore> evaluate_label_dirs(const fs::path& pred_dir, const fs::path& gt_dir) {
  for (const auto& d : {pred_dir, gt_dir})
    if (!fs::is_directory(d)) throw ValidationError("not a directory: " + d.string());
  std::map<std::string, fs::path> gt;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.path().extension() == ".labels") gt[e.path().stem().string()] = e.path();
  std::vector<ShapeScore> scores;
  std::map<std::string, fs::path> pred;
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.path().extension() == ".labels") pred[e.path().stem().string()] = e.path();
  for (const auto& [id, path] : pred) {
    auto it = gt.find(id);
    if (it == gt.end()) continue;
    KWayLabeling p = load_labeling(path);
    KWayLabeling g = load_labeling(it->second);
    if (p.size() != g.size())
      throw ValidationError("label count mismatch for '" + id + "': " + std::to_string(p.size()) + " vs " +
                            std::to_string(g.size()));
    ShapeScore s{id, rand_index(p, g), best_label_mapping(p.labels, g.labels).accuracy};
    scores.push_back(std::move(s));
  }
  if (scores.empty()) throw ValidationError("no matching <id>.labels files in " + pred_dir.string() + " and " + gt_dir.string());
  return scores;
}

double mean_rand_index(const std::vector<ShapeScore>& scores) {
  if (scores.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : scores) total += s.rand_index.score;
  return total / static_cast<double>(scores.size());
}

std::vector<LabeledDescriptor> ground_truth_part_descriptors(const ShapeSet& set, const PriorWeights& prior,
                                                             std::size_t min_points) {
  set.validate();
  const auto prepared = prepare_shapes(set.shapes, prior);
  std::vector<LabeledDescriptor> out;
  for (std::size_t s = 0; s < set.size(); ++s) {
    if (!set.ground_truth[s]) throw ValidationError("shape '" + set.shapes[s].id + "' has no ground-truth labels");
    const auto& gt = *set.ground_truth[s];
    for (int l : gt.labels_used()) {
      std::vector<double> mask(gt.size());
      std::size_t count = 0;
      for (std::size_t q = 0; q < gt.size(); ++q) {
        mask[q] = gt.labels[q] == l ? 1.0 : 0.0;
        count += gt.labels[q] == l ? 1 : 0;
      }
      if (count < min_points) continue;
      const Tensor d = part_descriptor(prepared[s].msg, mask, min_points);
      out.push_back({std::vector<double>(d.values().begin(), d.values().end()), l});
    }
  }
  return out;
}

namespace {

void write_summary(const ExperimentSummary& s, const fs::path& dir) {
  json timings = json::array();
  for (const auto& t : s.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  json scores = json::array();
  for (const auto& sc : s.scores)
    scores.push_back({{"id", sc.id}, {"rand_index", sc.rand_index.score}, {"mapped_accuracy", sc.mapped_accuracy}});
  json j = {{"name", s.name},
            {"complete", s.complete},
            {"failed_stage", s.failed_stage},
            {"error", s.error},
            {"timings", timings},
            {"scores", scores},
            {"mean_rand_index", s.mean_rand_index},
            {"coseg_status", s.coseg_status},
            {"initial_energy", s.initial_energy},
            {"final_energy", s.final_energy},
            {"labels_used", s.labels_used}};
  std::ofstream(dir / "summary.json") << j.dump(2) << "\n";

  std::ofstream txt(dir / "summary.txt");
  txt << "experiment " << s.name << ": " << (s.complete ? "complete" : "INCOMPLETE") << "\n";
  if (!s.complete) txt << "failed stage: " << s.failed_stage << "\nerror: " << s.error << "\n";
  for (const auto& t : s.timings) txt << "  stage " << t.stage << ": " << t.seconds << " s\n";
  if (!s.coseg_status.empty())
    txt << "coseg: " << s.coseg_status << ", energy " << s.initial_energy << " -> " << s.final_energy << "\n";
  for (const auto& sc : s.scores) txt << "  " << sc.id << "  RI " << sc.rand_index.score << "\n";
  if (!s.scores.empty()) txt << "mean RI " << s.mean_rand_index << "\n";
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentManifest& manifest, std::ostream* log) {
  manifest.validate();
  if (manifest.prior_checkpoint && !fs::exists(*manifest.prior_checkpoint))
    throw ValidationError("prior checkpoint not found: " + manifest.prior_checkpoint->string());
  const fs::path out = manifest.output_dir;
  fs::create_directories(out);
  const fs::path marker = out / "INCOMPLETE";
  std::ofstream(marker) << "run in progress or failed; see summary.txt\n";

  ExperimentSummary summary;
  summary.name = manifest.name;
  std::string stage;
  auto timed = [&](const std::string& name, auto&& fn) {
    stage = name;
    if (log) *log << "[" << manifest.name << "] stage " << name << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    summary.timings.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    SetManifest set_files;
    timed("synth", [&] { set_files = write_synth_set(manifest.coseg_set, out / "set"); });

    PriorWeights prior;
    if (manifest.prior_checkpoint) {
      timed("load-prior", [&] { prior = load_prior(*manifest.prior_checkpoint); });
    } else {
      timed("train-prior", [&] {
        const SetManifest data = write_synth_set(manifest.prior_data, out / "prior" / "data");
        auto result = train_prior(load_part_dataset(data), manifest.prior_train, [&](const TrainLogEntry& e) {
          if (log) *log << "  step " << e.step << " train " << e.train_loss << " validation " << e.validation_loss << "\n";
        });
        save_prior(result.weights, out / "prior" / "prior.ckpt");
        std::ofstream curve(out / "prior" / "curve.csv");
        curve << "step,train_loss,validation_loss\n";
        for (const auto& e : result.curve) curve << e.step << ',' << e.train_loss << ',' << e.validation_loss << "\n";
        prior = std::move(result.weights);
      });
    }

    CosegResult result;
    ShapeSet set;
    timed("coseg", [&] {
      set = load_shape_set(set_files);
      result = cosegment(set, prior, manifest.coseg);
      std::vector<std::string> ids;
      for (const auto& s : set.shapes) ids.push_back(s.id);
      write_coseg_outputs(result, ids, manifest.coseg, out / "coseg");
      summary.coseg_status = status_name(result.status);
      summary.initial_energy = result.initial_energy;
      summary.final_energy = result.final_energy;
      summary.labels_used = result.labels_used;
      if (!result.ok()) throw RuntimeFailure("co-segmentation collapsed:\n" + result.diagnostics);
    });

    if (manifest.evaluate) {
      timed("eval", [&] {
        summary.scores = evaluate_label_dirs(out / "coseg" / "labels", out / "set");
        summary.mean_rand_index = mean_rand_index(summary.scores);
      });
    }
    summary.complete = true;
  } catch (const std::exception& e) {
    summary.failed_stage = stage;
    summary.error = e.what();
    write_summary(summary, out);
    const std::string what = "stage " + stage + " failed: " + e.what();
    if (dynamic_cast<const ValidationError*>(&e) != nullptr) throw ValidationError(what);
    throw RuntimeFailure(what);
  }
  write_summary(summary, out);
  fs::remove(marker);
  return summary;
}

}  // namespace groupseg
