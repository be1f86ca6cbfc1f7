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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "groupseg/corruption.hpp"
#include "groupseg/coseg.hpp"
#include "groupseg/experiment.hpp"
#include "groupseg/linalg.hpp"
#include "groupseg/metrics.hpp"
#include "groupseg/part_prior.hpp"
#include "groupseg/rank_probe.hpp"
#include "groupseg/synth.hpp"

namespace fs = std::filesystem;
using namespace groupseg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. σ₂ gradient against central differences

Outcome svd_gradient() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  std::size_t accepted = 0, drawn = 0;
  while (accepted < 50) {
    ++drawn;
    Tensor m = Tensor::matrix(8, 5);
    for (auto& v : m.values()) v = u(rng);
    const auto s = svd(m).s;
    bool gaps = true;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) gaps = gaps && s[i] - s[i + 1] >= 0.1;
    if (!gaps) continue;
    ++accepted;
    Tensor p = m;
    p.set_requires_grad(true);
    {
      Tape tape;
      tape.backward(second_singular_value(tape.parameter(p)));
    }
    const double h = 1e-5;
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      Tensor a = m, b = m;
      a[i] += h;
      b[i] -= h;
      const double numeric = (second_singular_value(a) - second_singular_value(b)) / (2 * h);
      diff = std::max(diff, std::abs(numeric - p.grad()[i]));
      scale = std::max(scale, std::abs(numeric));
    }
    worst = std::max(worst, diff / scale);
  }
  return {worst <= 1e-4, fmt("50 matrices (%zu drawn), max relative error %.2e (limit 1e-4)", drawn, worst)};
}

// ---------------------------------------------------------------------------
// 2. Rand Index against pair enumeration

Outcome rand_index_oracle() {
  std::mt19937_64 rng(99);
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 50)(rng);
    const int kp = std::uniform_int_distribution<int>(1, 5)(rng), kg = std::uniform_int_distribution<int>(1, 5)(rng);
    std::vector<int> pred(n), gt(n);
    for (auto& l : pred) l = std::uniform_int_distribution<int>(0, kp - 1)(rng);
    for (auto& l : gt) l = std::uniform_int_distribution<int>(0, kg - 1)(rng);
    std::uint64_t agree = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        agree += (pred[i] == pred[j]) == (gt[i] == gt[j]) ? 1 : 0;
        ++total;
      }
    const auto r = rand_index(pred, gt);
    const double brute = static_cast<double>(total - agree) / static_cast<double>(total);
    if (r.pairs_agreeing != agree || r.pairs_total != total || r.score != brute) ++mismatches;
  }
  const double example = rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}).score;
  return {mismatches == 0 && example == 2.0 / 3.0,
          fmt("%zu/100 mismatches; [0,0,1,1] vs [0,1,0,1] = %.17g", mismatches, example)};
}

// ---------------------------------------------------------------------------
// 3. σ₂ ordering of label collections; MSE counterexample

Outcome rank_ordering() {
  // Inter-cluster angles 60°, 75°, 90°; every member within 2.5° of its
  // centre, so pairwise spread inside a cluster is at most 5°.
  const auto centers = unit_vectors_with_angles({{0, 60, 75}, {60, 0, 90}, {75, 90, 0}}, 16);
  RankProbeConfig cfg;
  cfg.subset_sizes = {1, 2, 3};
  cfg.samples_per_subset = 50;
  cfg.seed = 5;
  const auto r = rank_probe(cluster_descriptors(centers, 100, 2.5, 17), cfg);
  const auto *one = r.for_count(1), *two = r.for_count(2), *three = r.for_count(3);
  const bool ordered = one->sigma2_max < two->sigma2_min && two->sigma2_min < three->sigma2_min;

  // Two labels 150° apart against three labels with a middle cluster: the
  // pooled spread of the pair exceeds that of the triple.
  const auto far = unit_vectors_with_angles({{0, 150, 80}, {150, 0, 80}, {80, 80, 0}}, 16);
  cfg.subset_sizes = {1, 2, 3};
  const auto c = rank_probe(cluster_descriptors(far, 100, 2.5, 18), cfg);
  const auto *c1 = c.for_count(1), *c2 = c.for_count(2), *c3 = c.for_count(3);
  const bool mse_violates = !(c1->mse_max < c2->mse_min && c2->mse_max < c3->mse_min);
  return {ordered && mse_violates,
          fmt("sigma2: max1 %.4f < min2 %.4f < min3 %.4f (%zu/%zu/%zu collections); "
              "MSE on the counterexample: max2 %.4f vs min3 %.4f, ordering %s",
              one->sigma2_max, two->sigma2_min, three->sigma2_min, one->samples, two->samples, three->samples,
              c2->mse_max, c3->mse_min, mse_violates ? "violated" : "kept")};
}

// ---------------------------------------------------------------------------
// Shared synthetic data

PartExample part_example(ShapeFamily family, bool arms, std::uint64_t seed) {
  const auto s = synth_shape({family, 512, arms, 0.005, seed, family_name(family) + std::to_string(seed)});
  return {s.cloud, part_masks(s.ground_truth)};
}

// Alternating two_box / chair_like, a quarter of the chairs with arms.
std::vector<PartExample> prior_shapes(std::size_t count, std::uint64_t seed0) {
  std::vector<PartExample> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(part_example(i % 2 ? ShapeFamily::kChairLike : ShapeFamily::kTwoBox, i % 4 == 1, seed0 + i));
  return out;
}

ShapeSet chair_set(std::size_t count, bool arms, std::uint64_t seed0, const std::string& prefix) {
  ShapeSet set;
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = synth_shape({ShapeFamily::kChairLike, 512, arms, 0.005, seed0 + i, prefix + std::to_string(i)});
    set.shapes.push_back(s.cloud);
    set.ground_truth.push_back(s.ground_truth);
  }
  return set;
}

double mean_ri(const CosegResult& r, const ShapeSet& set) {
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) total += rand_index(r.labelings[i], *set.ground_truth[i]).score;
  return total / static_cast<double>(set.size());
}

// ---------------------------------------------------------------------------
// 4. Part prior

struct PriorStage {
  PriorWeights weights;
  double seconds = 0.0;
};

PriorStage train_stage(std::uint64_t seed) {
  const auto t0 = Clock::now();
  PriorTrainConfig cfg;  // 5000 steps, 20–30% corruption
  cfg.seed = seed;
  cfg.log_every = 1000;
  auto r = train_prior(prior_shapes(30, 100), cfg, [](const TrainLogEntry& e) {
    std::printf("  [prior] step %zu train %.4f validation %.4f\n", e.step, e.train_loss, e.validation_loss);
    std::fflush(stdout);
  });
  return {std::move(r.weights), seconds_since(t0)};
}

Outcome prior_accuracy(PriorWeights& prior, double train_seconds) {
  const auto t0 = Clock::now();
  const auto held = prior_shapes(10, 900);
  std::mt19937_64 rng(4);
  double acc = 0.0;
  for (std::size_t m = 0; m < 50; ++m) {
    const auto& ex = held[m % held.size()];
    const auto& clean = ex.parts[(m / held.size()) % ex.parts.size()];
    CorruptionSpec cs;
    cs.insert_rate = std::uniform_real_distribution<double>(0.2, 0.3)(rng);
    cs.delete_rate = std::uniform_real_distribution<double>(0.2, 0.3)(rng);
    cs.seed = rng();
    acc += denoise_accuracy(denoise(ex.cloud, corrupt_mask(ex.cloud, clean, cs), prior), clean);
  }
  acc /= 50.0;
  const double total = train_seconds + seconds_since(t0);
  return {acc >= 0.95 && total <= 600.0,
          fmt("held-out accuracy %.4f over 50 masks (limit 0.95); %.0f s (limit 600)", acc, total)};
}

// ---------------------------------------------------------------------------
// 5–9. Co-segmentation

constexpr std::uint64_t kCosegSeed = 1;

CosegConfig coseg_config(int k, std::uint64_t seed = kCosegSeed) {
  CosegConfig c;
  c.k = k;
  c.seed = seed;
  return c;
}

struct Criterion5 {
  Outcome outcome;
  CosegResult result;
};

Criterion5 coseg_quality(const ShapeSet& set, const PriorWeights& prior) {
  const auto t0 = Clock::now();
  CosegResult r = cosegment(set, prior, coseg_config(3));
  const double secs = seconds_since(t0);
  const double ri = mean_ri(r, set);
  const bool pass = r.ok() && ri <= 0.15 && r.final_energy < r.initial_energy && secs <= 600.0;
  return {{pass, fmt("mean RI %.4f (limit 0.15); energy %.4f -> %.4f; status %s, restarts %zu; %.0f s", ri,
                     r.initial_energy, r.final_energy, status_name(r.status).c_str(), r.restarts, secs)},
          std::move(r)};
}

std::size_t distinct_labels(const CosegResult& r) { return r.labels_used.size(); }

Outcome granularity(const ShapeSet& set, const PriorWeights& prior) {
  const auto k5 = cosegment(set, prior, coseg_config(5));
  std::size_t max_per_shape = 0;
  for (const auto& l : k5.labelings) max_per_shape = std::max(max_per_shape, l.labels_used().size());
  const auto k2 = cosegment(set, prior, coseg_config(2));
  const auto k4 = cosegment(set, prior, coseg_config(4));
  const bool pass = k5.ok() && max_per_shape <= 5 && distinct_labels(k5) < 5 && k2.ok() && k4.ok() &&
                    distinct_labels(k4) > distinct_labels(k2);
  return {pass, fmt("K=5 uses %zu labels (max %zu per shape); K=2 uses %zu, K=4 uses %zu", distinct_labels(k5),
                    max_per_shape, distinct_labels(k2), distinct_labels(k4))};
}

// Labels populated in a labeling, as a partition signature: the number of
// populated labels and the RI between the two partitions of one shape.
Outcome adaptivity(const PriorWeights& prior) {
  const auto shared = synth_shape({ShapeFamily::kChairLike, 512, false, 0.005, 777, "shared"});
  auto with_shared = [&](ShapeSet set) {
    set.shapes.push_back(shared.cloud);
    set.ground_truth.push_back(shared.ground_truth);
    return set;
  };
  const ShapeSet armed = with_shared(chair_set(7, true, 600, "armed"));
  const ShapeSet armless = with_shared(chair_set(7, false, 700, "armless"));
  const auto ra = cosegment(armed, prior, coseg_config(4));
  const auto rb = cosegment(armless, prior, coseg_config(4));
  const auto& la = ra.labelings.back();
  const auto& lb = rb.labelings.back();
  const std::size_t used_a = la.labels_used().size(), used_b = lb.labels_used().size();
  const double between = rand_index(la, lb).score;
  const double ri_a = mean_ri(ra, armed), ri_b = mean_ri(rb, armless);
  const bool differ = used_a != used_b || between > 0.0;
  const bool pass = ra.ok() && rb.ok() && differ && ri_a <= 0.2 && ri_b <= 0.2;
  return {pass, fmt("shared shape: %zu labels in armed set, %zu in armless set, RI between its labelings %.4f; "
                    "set RI %.4f / %.4f (limit 0.2)",
                    used_a, used_b, between, ri_a, ri_b)};
}

Outcome ablations(const ShapeSet& set, const PriorWeights& prior, const CosegResult& full) {
  auto cfg = coseg_config(3);
  cfg.ablation = Ablation::kNoContrastive;
  const auto nc = cosegment(set, prior, cfg);
  const double full_final = full.trace.back().group_energy();
  double nc_best = 1e300;
  for (const auto& e : nc.trace) nc_best = std::min(nc_best, e.group_energy());
  cfg.ablation = Ablation::kNoPrior;
  const auto np = cosegment(set, prior, cfg);
  const double ri_full = mean_ri(full, set), ri_np = mean_ri(np, set);
  const bool pass = nc_best >= full_final && ri_np > ri_full;
  return {pass, fmt("no-contrastive: lowest group energy %.4f vs full run's final %.4f; no-prior RI %.4f vs full %.4f",
                    nc_best, full_final, ri_np, ri_full)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const ShapeSet& set, const PriorWeights& prior, const CosegResult& first) {
  const fs::path dir = fs::temp_directory_path() / ("groupseg_acceptance_" + std::to_string(std::random_device{}()));
  std::vector<std::string> ids;
  for (const auto& s : set.shapes) ids.push_back(s.id);
  const auto cfg = coseg_config(3);
  write_coseg_outputs(first, ids, cfg, dir / "a");
  write_coseg_outputs(cosegment(set, prior, cfg), ids, cfg, dir / "b");
  std::size_t same = 0;
  for (const auto& id : ids)
    same += slurp(dir / "a" / "labels" / (id + ".labels")) == slurp(dir / "b" / "labels" / (id + ".labels")) ? 1 : 0;
  fs::remove_all(dir);
  return {same == ids.size(), fmt("%zu/%zu label files byte-identical on rerun", same, ids.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groupseg acceptance suite"};
  std::string prior_path, save_prior_path;
  std::vector<int> only;
  app.add_option("--prior", prior_path, "Use this prior for criteria 5-9 instead of the one trained for criterion 4");
  app.add_option("--save-prior", save_prior_path, "Write the prior trained for criterion 4");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    if (!wanted(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %d: %s  %s — %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "sigma2 gradient", svd_gradient);
  report(2, "Rand Index oracle", rand_index_oracle);
  report(3, "rank ordering", rank_ordering);

  std::optional<PriorWeights> prior;
  if (!prior_path.empty()) prior = load_prior(prior_path);
  if (wanted(4)) {
    report(4, "part prior", [&] {
      PriorStage stage = train_stage(1);
      const Outcome o = prior_accuracy(stage.weights, stage.seconds);
      if (!save_prior_path.empty()) save_prior(stage.weights, save_prior_path);
      if (!prior) prior = std::move(stage.weights);
      return o;
    });
  }
  if (!prior && (wanted(5) || wanted(6) || wanted(7) || wanted(8) || wanted(9))) {
    std::printf("criteria 5-9 need a prior: run criterion 4 or pass --prior\n");
    return failures + 1;
  }

  const ShapeSet set = chair_set(8, false, 500, "chair");
  std::optional<CosegResult> full;
  auto need_full = [&]() -> const CosegResult& {
    if (!full) full = cosegment(set, *prior, coseg_config(3));
    return *full;
  };
  report(5, "co-segmentation quality", [&] {
    auto c = coseg_quality(set, *prior);
    full = std::move(c.result);
    return c.outcome;
  });
  report(6, "K bound and granularity", [&] { return granularity(set, *prior); });
  report(7, "adaptivity to the set", [&] { return adaptivity(*prior); });
  report(8, "ablations", [&] { return ablations(set, *prior, need_full()); });
  report(9, "determinism", [&] { return determinism(set, *prior, need_full()); });
  return failures;
}
