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

// groupseg command-line interface.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime or convergence failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "groupseg/coseg.hpp"
#include "groupseg/error.hpp"
#include "groupseg/experiment.hpp"
#include "groupseg/manifest.hpp"
#include "groupseg/part_prior.hpp"
#include "groupseg/rank_probe.hpp"
#include "groupseg/svg_plot.hpp"

namespace fs = std::filesystem;
using namespace groupseg;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ValidationError("not a number in list: '" + cell + "'");
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

struct SynthArgs {
  std::string manifest, out;
};

int cmd_synth(const SynthArgs& a) {
  const SynthManifest m = load_synth_manifest(a.manifest);
  const SetManifest set = write_synth_set(m, a.out);
  std::cout << "wrote " << set.entries.size() << " shapes to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, out, curve;
  PriorTrainConfig cfg;
};

int cmd_train(TrainArgs& a) {
  const auto data = load_any_part_dataset(a.data);
  a.cfg.encoder.validate();
  const auto result = train_prior(data, a.cfg, [](const TrainLogEntry& e) {
    std::printf("step %6zu  train %.5f  validation %.5f\n", e.step, e.train_loss, e.validation_loss);
    std::fflush(stdout);
  });
  save_prior(result.weights, a.out);
  if (!a.curve.empty()) {
    std::ostringstream csv;
    csv << "step,train_loss,validation_loss\n";
    for (const auto& e : result.curve) csv << e.step << ',' << e.train_loss << ',' << e.validation_loss << "\n";
    write_file(a.curve, csv.str());
  }
  std::cout << "saved prior to " << a.out << "\n";
  return 0;
}

struct CosegArgs {
  std::string set, prior, out, ablate = "none";
  CosegConfig cfg;
};

int cmd_coseg(CosegArgs& a) {
  a.cfg.ablation = parse_ablation(a.ablate);
  a.cfg.validate();
  const ShapeSet set = load_any_shape_set(a.set);
  const PriorWeights prior = load_prior(a.prior);
  const CosegResult result = cosegment(set, prior, a.cfg);
  std::vector<std::string> ids;
  for (const auto& s : set.shapes) ids.push_back(s.id);
  write_coseg_outputs(result, ids, a.cfg, a.out);
  std::cout << "status " << status_name(result.status) << ", energy " << result.initial_energy << " -> "
            << result.final_energy << ", labels used " << result.labels_used.size() << "\n";
  if (!result.ok()) {
    std::cerr << "co-segmentation failed:\n" << result.diagnostics;
    return 2;
  }
  return 0;
}

struct EvalArgs {
  std::string pred, gt, out;
};

int cmd_eval(const EvalArgs& a) {
  const auto scores = evaluate_label_dirs(a.pred, a.gt);
  std::ostringstream csv;
  csv << "id,rand_index,pairs_agreeing,pairs_total,mapped_accuracy\n";
  for (const auto& s : scores)
    csv << s.id << ',' << s.rand_index.score << ',' << s.rand_index.pairs_agreeing << ','
        << s.rand_index.pairs_total << ',' << s.mapped_accuracy << "\n";
  std::cout << csv.str() << "mean_rand_index," << mean_rand_index(scores) << "\n";
  if (!a.out.empty()) write_file(a.out, csv.str());
  return 0;
}

struct ProbeArgs {
  std::string set, prior, out, sizes, angles = "60,75,90";
  bool synthetic = false;
  double spread = 2.5;
  std::size_t per_cluster = 100;
  RankProbeConfig cfg;
};

int cmd_rank_probe(ProbeArgs& a) {
  for (double s : parse_list(a.sizes.empty() ? "" : a.sizes)) {
    if (s < 1 || s != static_cast<double>(static_cast<std::size_t>(s))) throw ValidationError("bad subset size");
    a.cfg.subset_sizes.push_back(static_cast<std::size_t>(s));
  }
  a.cfg.validate();
  std::vector<LabeledDescriptor> parts;
  if (a.synthetic) {
    const auto ang = parse_list(a.angles);
    if (ang.size() != 3) throw ValidationError("--angles needs three pairwise angles: a01,a02,a12");
    const std::vector<std::vector<double>> m{{0, ang[0], ang[1]}, {ang[0], 0, ang[2]}, {ang[1], ang[2], 0}};
    parts = cluster_descriptors(unit_vectors_with_angles(m, 16), a.per_cluster, a.spread, a.cfg.seed);
  } else {
    if (a.set.empty() || a.prior.empty()) throw ValidationError("rank-probe needs --set and --prior, or --synthetic");
    const ShapeSet set = load_any_shape_set(a.set);
    parts = ground_truth_part_descriptors(set, load_prior(a.prior));
  }
  const RankProbeReport report = rank_probe(parts, a.cfg);
  write_rank_probe_csv(report, a.out);
  for (const auto& n : report.notes) std::cout << "note: " << n << "\n";
  std::cout << "labels  samples  sigma2_min  sigma2_max  mse_min  mse_max\n";
  for (const auto& s : report.summary)
    std::printf("%6zu  %7zu  %10.5f  %10.5f  %7.5f  %7.5f\n", s.distinct_labels, s.samples, s.sigma2_min,
                s.sigma2_max, s.mse_min, s.mse_max);
  return 0;
}

int cmd_run(const std::string& manifest) {
  const ExperimentManifest m = load_experiment_manifest(manifest);
  const ExperimentSummary s = run_experiment(m, &std::cout);
  std::cout << "experiment " << s.name << " complete";
  if (!s.scores.empty()) std::cout << ", mean RI " << s.mean_rand_index;
  std::cout << "\n";
  return 0;
}

struct PlotArgs {
  std::string csv, out, kind = "energy", title;
};

int cmd_plot(const PlotArgs& a) {
  const auto cols = read_numeric_csv(a.csv);
  auto col = [&](const std::string& name) -> const std::vector<double>& {
    auto it = cols.find(name);
    if (it == cols.end()) throw ValidationError(a.csv + ": missing numeric column '" + name + "'");
    return it->second;
  };
  std::vector<Series> series;
  ChartSpec spec;
  if (a.kind == "energy") {
    const auto& it = col("iteration");
    for (const char* name : {"rank", "contrastive", "completeness", "total"}) series.push_back({name, it, col(name)});
    spec = {a.title.empty() ? "Energy trace" : a.title, "iteration", "energy", true};
  } else if (a.kind == "rank-probe") {
    series.push_back({"sigma2", col("distinct_labels"), col("sigma2")});
    series.push_back({"mse", col("distinct_labels"), col("mse")});
    spec = {a.title.empty() ? "Rank probe" : a.title, "distinct labels in collection", "score", false};
  } else if (a.kind == "training") {
    series.push_back({"train", col("step"), col("train_loss")});
    series.push_back({"validation", col("step"), col("validation_loss")});
    spec = {a.title.empty() ? "Prior training" : a.title, "step", "NLL", true};
  } else {
    throw ValidationError("--kind must be energy, rank-probe or training");
  }
  write_file(a.out, render_chart_svg(series, spec));
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive point-cloud co-segmentation with a learned part prior"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate synthetic shapes and ground-truth labels");
  s->add_option("--manifest", synth.manifest, "Synth manifest (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train-prior", "Train the part-denoising prior");
  t->add_option("--data", train.data, "Set or synth manifest with labeled shapes")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--steps", train.cfg.steps, "Training steps")->capture_default_str();
  t->add_option("--seed", train.cfg.seed, "Random seed")->capture_default_str();
  t->add_option("--lr", train.cfg.adam.learning_rate, "Peak learning rate")->capture_default_str();
  t->add_option("--batch", train.cfg.batch, "Masks per step")->capture_default_str();
  t->add_option("--rate-lo", train.cfg.rate_lo, "Lowest corruption rate")->capture_default_str();
  t->add_option("--rate-hi", train.cfg.rate_hi, "Highest corruption rate")->capture_default_str();
  t->add_option("--neighbor-cap", train.cfg.encoder.neighbor_cap, "Neighbours kept per radius (0 = all)")
      ->capture_default_str();
  t->add_option("--log-every", train.cfg.log_every, "Validation interval in steps")->capture_default_str();
  t->add_option("--curve", train.curve, "Write the training curve as CSV");
  bool constant_lr = false;
  t->add_flag("--constant-lr", constant_lr, "Disable cosine learning-rate decay");

  CosegArgs coseg;
  auto* c = app.add_subcommand("coseg", "Co-segment a set of shapes");
  c->add_option("--set", coseg.set, "Set or synth manifest")->required()->check(CLI::ExistingFile);
  c->add_option("--k", coseg.cfg.k, "Upper bound on labels")->required();
  c->add_option("--prior", coseg.prior, "Prior checkpoint")->required()->check(CLI::ExistingFile);
  c->add_option("--out", coseg.out, "Output directory")->required();
  c->add_option("--lambda", coseg.cfg.lambda, "Completeness weight")->capture_default_str();
  c->add_option("--iters", coseg.cfg.max_iters, "Maximum iterations")->capture_default_str();
  c->add_option("--seed", coseg.cfg.seed, "Random seed")->capture_default_str();
  c->add_option("--lr", coseg.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  c->add_option("--ablate", coseg.ablate, "none|no-prior|no-contrastive|no-completeness|mrg-parts")
      ->capture_default_str();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Rand Index of predicted against ground-truth labels");
  e->add_option("--pred", eval.pred, "Directory of <id>.labels predictions")->required();
  e->add_option("--gt", eval.gt, "Directory of <id>.labels ground truth")->required();
  e->add_option("--out", eval.out, "Write per-shape scores as CSV");

  ProbeArgs probe;
  auto* r = app.add_subcommand("rank-probe", "Rank scores of labeled part collections");
  r->add_option("--set", probe.set, "Labeled set or synth manifest");
  r->add_option("--prior", probe.prior, "Prior checkpoint (descriptor encoder)");
  r->add_flag("--synthetic", probe.synthetic, "Use three synthetic descriptor clusters");
  r->add_option("--angles", probe.angles, "Synthetic cluster angles a01,a02,a12 (degrees)")->capture_default_str();
  r->add_option("--spread", probe.spread, "Max angle from cluster center (degrees)")->capture_default_str();
  r->add_option("--per-cluster", probe.per_cluster, "Synthetic descriptors per cluster")->capture_default_str();
  r->add_option("--sizes", probe.sizes, "Comma-separated subset sizes (default: proper subsets)");
  r->add_option("--samples", probe.cfg.samples_per_subset, "Collections per subset")->capture_default_str();
  r->add_option("--per-label", probe.cfg.parts_per_label, "Parts drawn per label")->capture_default_str();
  r->add_option("--seed", probe.cfg.seed, "Random seed")->capture_default_str();
  r->add_option("--out", probe.out, "CSV report")->required();

  std::string run_manifest;
  auto* run = app.add_subcommand("run", "Run an experiment manifest end to end");
  run->add_option("--manifest", run_manifest, "Experiment manifest (JSON)")->required()->check(CLI::ExistingFile);

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render a CSV report as SVG");
  p->add_option("--csv", plot.csv, "energy.csv, rank-probe CSV or training curve")->required()->check(CLI::ExistingFile);
  p->add_option("--kind", plot.kind, "energy|rank-probe|training")->capture_default_str();
  p->add_option("--title", plot.title, "Chart title");
  p->add_option("--out", plot.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*t) {
      train.cfg.cosine_decay = !constant_lr;
      return cmd_train(train);
    }
    if (*c) return cmd_coseg(coseg);
    if (*e) return cmd_eval(eval);
    if (*r) return cmd_rank_probe(probe);
    if (*run) return cmd_run(run_manifest);
    if (*p) return cmd_plot(plot);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "failure: " << err.what() << "\n";
    return 2;
  }
  return 1;
}
