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

#include "groupseg/coseg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "groupseg/adam.hpp"
#include "groupseg/error.hpp"
#include "groupseg/linalg.hpp"

namespace groupseg {

Ablation parse_ablation(std::string_view name) {
  if (name.empty() || name == "none") return Ablation::kNone;
  if (name == "no-prior") return Ablation::kNoPrior;
  if (name == "no-contrastive") return Ablation::kNoContrastive;
  if (name == "no-completeness") return Ablation::kNoCompleteness;
  if (name == "mrg-parts") return Ablation::kMrgParts;
  throw ValidationError("unknown ablation '" + std::string(name) +
                        "' (expected none, no-prior, no-contrastive, no-completeness, mrg-parts)");
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoPrior: return "no-prior";
    case Ablation::kNoContrastive: return "no-contrastive";
    case Ablation::kNoCompleteness: return "no-completeness";
    case Ablation::kMrgParts: return "mrg-parts";
  }
  return "none";
}

std::string status_name(CosegStatus s) {
  switch (s) {
    case CosegStatus::kConverged: return "converged";
    case CosegStatus::kMaxIterations: return "max-iterations";
    case CosegStatus::kCollapsed: return "collapsed";
  }
  return "unknown";
}

void CosegConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("coseg config: " + m); };
  if (k < 2) fail("k must be at least 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be finite and non-negative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (hidden == 0) fail("hidden width must be positive");
  if (!(init_gain > 0.0)) fail("init gain must be positive");
  if (batch_size < 2 || batch_stride == 0 || batch_stride > batch_size) fail("need batch >= 2 and 0 < stride <= batch");
  if (stop_window == 0 || collapse_window == 0) fail("windows must be positive");
  if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) fail("mask threshold must lie in (0, 1)");
  if (!(stop_tolerance >= 0.0)) fail("stop tolerance must be non-negative");
}

std::vector<Tensor*> CosegWeights::parameters() { return groupseg::parameters(net); }

CosegWeights make_coseg_weights(int k, std::size_t hidden, double init_gain, std::mt19937_64& rng) {
  if (k < 2) throw ValidationError("make_coseg_weights: k must be at least 2");
  CosegWeights w;
  w.k = k;
  w.net = make_mlp({kFeatureWidth, hidden, static_cast<std::size_t>(k)}, Activation::kRelu, Activation::kNone, rng,
                   init_gain);
  return w;
}

std::vector<PreparedShape> prepare_shapes(const std::vector<PointCloud>& shapes, const PriorWeights& prior) {
  PriorWeights frozen = prior;
  frozen.set_requires_grad(false);
  std::vector<PreparedShape> out;
  out.reserve(shapes.size());
  std::vector<double> mean(kFeatureWidth, 0.0), sq(kFeatureWidth, 0.0);
  std::size_t total = 0;
  for (const auto& cloud : shapes) {
    ShapeEncoding enc = encode_shape(cloud, frozen);
    PreparedShape p;
    p.id = cloud.id;
    p.msg = std::move(enc.msg);
    p.mrg = std::move(enc.mrg);
    {
      Tape tape;
      p.point_term = prior_point_term(tape.constant(p.mrg), frozen.classifier).value();
    }
    const std::size_t n = p.mrg.rows();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < kFeatureWidth; ++j) {
        const double v = p.mrg(r, j);
        mean[j] += v;
        sq[j] += v * v;
      }
    }
    total += n;
    out.push_back(std::move(p));
  }
  if (total == 0) throw ValidationError("prepare_shapes: empty set");
  std::vector<double> inv_std(kFeatureWidth);
  for (std::size_t j = 0; j < kFeatureWidth; ++j) {
    mean[j] /= static_cast<double>(total);
    const double var = std::max(sq[j] / static_cast<double>(total) - mean[j] * mean[j], 0.0);
    // Dead feature channels stay at zero instead of blowing up.
    inv_std[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  }
  for (auto& p : out) {
    p.input = Tensor::matrix(p.mrg.rows(), kFeatureWidth);
    for (std::size_t r = 0; r < p.mrg.rows(); ++r)
      for (std::size_t j = 0; j < kFeatureWidth; ++j) p.input(r, j) = (p.mrg(r, j) - mean[j]) * inv_std[j];
  }
  return out;
}

Var classify_kway(Var input, CosegWeights& weights) {
  if (input.cols() != kFeatureWidth) throw ValidationError("classify_kway: expected 128-wide input");
  return mlp_forward(input, weights.net);
}

Tensor classify_kway(const PointCloud& cloud, const PriorWeights& prior, CosegWeights& weights) {
  auto prepared = prepare_shapes({cloud}, prior);
  Tape tape;
  return classify_kway(tape.constant(prepared[0].input), weights).value();
}

namespace {

// Frozen prior classifier tail evaluated on a tape as constants, so no
// gradient can reach prior parameters.
Var frozen_prior_logits(Var point_term, Var fg, const PriorClassifier& prior) {
  Tape& tape = *point_term.tape;
  Var h = relu(add_row(point_term, linear(fg, tape.constant(prior.fg_weight), tape.constant(prior.bias))));
  for (const auto& layer : prior.tail) {
    h = linear(h, tape.constant(layer.weight), tape.constant(layer.bias));
    if (layer.activation == Activation::kRelu) h = relu(h);
  }
  return h;
}

}  // namespace

Var refine_and_recompose(Var logits, Var msg, Var point_term, const PriorClassifier& prior, const CosegConfig& config) {
  Tape& tape = *logits.tape;
  const std::size_t n = logits.rows(), k = logits.cols();
  if (msg.rows() != n || point_term.rows() != n) throw ValidationError("refine_and_recompose: row count mismatch");
  if (config.ablation == Ablation::kNoPrior) return softmax_rows(logits);
  Var weights = softmax_rows(logits);
  std::vector<Var> columns;
  columns.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Var w = column(weights, i);
    Var mask;
    if (config.straight_through) {
      mask = straight_through_threshold(w, config.mask_threshold);
    } else {
      Tensor m = Tensor::matrix(n, 1);
      for (std::size_t q = 0; q < n; ++q) m[q] = w.value()[q] > config.mask_threshold ? 1.0 : 0.0;
      mask = tape.constant(std::move(m));
    }
    bool empty = true;
    for (double v : mask.value().values()) empty = empty && v == 0.0;
    if (empty) {
      Tensor dead = Tensor::matrix(n, 1);
      std::fill(dead.values().begin(), dead.values().end(), config.dead_label_logit);
      columns.push_back(tape.constant(std::move(dead)));
      continue;
    }
    Var pl = frozen_prior_logits(point_term, weighted_mean_rows(msg, mask), prior);
    Var log_odds = sub(column(pl, 1), column(pl, 0));
    columns.push_back(config.logit_weight == 0.0 ? log_odds
                                                 : add(log_odds, scale(column(logits, i), config.logit_weight)));
  }
  return softmax_rows(concat_cols(columns));
}

Tensor refine_and_recompose(const PointCloud& cloud, const Tensor& logits, const PriorWeights& prior,
                            const CosegConfig& config) {
  if (logits.rank() != 2 || logits.rows() != cloud.size()) throw ValidationError("refine_and_recompose: bad logits");
  auto prepared = prepare_shapes({cloud}, prior);
  Tape tape;
  return refine_and_recompose(tape.constant(logits), tape.constant(prepared[0].msg),
                              tape.constant(prepared[0].point_term), prior.classifier, config)
      .value();
}

Var part_descriptor(Var field, Var soft_mask) { return l2_normalize_rows(col_max(mul_col(field, soft_mask))); }

Tensor part_descriptor(const Tensor& field, const std::vector<double>& soft_mask, std::size_t min_points) {
  if (soft_mask.size() != field.rows()) throw ValidationError("part_descriptor: mask length mismatch");
  std::size_t support = 0;
  for (double v : soft_mask) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("part_descriptor: mask weights must lie in [0, 1]");
    support += v > 0.0 ? 1 : 0;
  }
  if (support < std::max<std::size_t>(min_points, 1)) throw ValidationError("part_descriptor: support below threshold");
  Tape tape;
  Tensor m = Tensor::matrix(soft_mask.size(), 1);
  std::copy(soft_mask.begin(), soft_mask.end(), m.values().begin());
  return part_descriptor(tape.constant(field), tape.constant(std::move(m))).value();
}

ConsistencyTerms group_consistency_loss(const std::vector<PartFeatureMatrix>& matrices) {
  std::vector<const PartFeatureMatrix*> present;
  for (const auto& m : matrices)
    if (m.size() > 0 && m.rows.valid()) present.push_back(&m);
  if (present.empty()) throw ValidationError("group_consistency_loss: no non-empty part matrix");
  ConsistencyTerms t;
  t.labels_present = present.size();
  // max/min pass gradient through their achieving argument only.
  for (const auto* m : present) {
    Var s = second_singular_value(m->rows);
    if (!t.rank.valid() || s.item() > t.rank.item()) t.rank = s;
  }
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      Var s = second_singular_value(concat_rows({present[a]->rows, present[b]->rows}));
      if (!t.contrastive.valid() || s.item() < t.contrastive.item()) t.contrastive = s;
    }
  }
  t.degenerate = !t.contrastive.valid();
  t.energy = t.degenerate ? add_scalar(t.rank, 1.0) : add_scalar(sub(t.rank, t.contrastive), 1.0);
  return t;
}

Var completeness_loss(const std::vector<Var>& prob_maps) {
  if (prob_maps.empty()) throw ValidationError("completeness_loss: no probability maps");
  Var claimed;
  std::size_t points = 0;
  for (const auto& p : prob_maps) {
    Var s = sum(row_max(p));
    claimed = claimed.valid() ? add(claimed, s) : s;
    points += p.rows();
  }
  return add_scalar(scale(claimed, -1.0 / static_cast<double>(points)), 1.0);
}

std::vector<std::size_t> batch_starts(std::size_t n, const CosegConfig& config) {
  if (n <= config.full_set_limit || n <= config.batch_size) return {0};
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + config.batch_size <= n; s += config.batch_stride) starts.push_back(s);
  if (starts.back() + config.batch_size < n) starts.push_back(n - config.batch_size);
  return starts;
}

namespace {

struct BatchEval {
  Var objective;
  EnergyRecord record;
  std::size_t labels_present = 0;
  std::vector<Tensor> probs;  // per shape in batch
};

std::vector<int> argmax_rows(const Tensor& p) {
  std::vector<int> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.cols(); ++j)
      if (p(r, j) > p(r, best)) best = j;
    out[r] = static_cast<int>(best);
  }
  return out;
}

BatchEval evaluate_batch(Tape& tape, const std::vector<PreparedShape>& shapes, std::size_t begin, std::size_t end,
                         CosegWeights& weights, const PriorClassifier& prior, const CosegConfig& config) {
  const auto k = static_cast<std::size_t>(config.k);
  std::vector<Var> maps;
  std::vector<PartFeatureMatrix> matrices(k);
  std::vector<std::vector<Var>> label_rows(k);
  for (std::size_t i = 0; i < k; ++i) matrices[i].label = static_cast<int>(i);
  BatchEval ev;
  for (std::size_t s = begin; s < end; ++s) {
    const auto& sh = shapes[s];
    Var msg = tape.constant(sh.msg);
    Var logits = classify_kway(tape.constant(sh.input), weights);
    Var probs = refine_and_recompose(logits, msg, tape.constant(sh.point_term), prior, config);
    maps.push_back(probs);
    ev.probs.push_back(probs.value());
    Var field = config.ablation == Ablation::kMrgParts ? tape.constant(sh.mrg) : msg;
    std::vector<std::size_t> support(k, 0);
    for (int l : argmax_rows(probs.value())) ++support[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < k; ++i) {
      if (support[i] < config.min_part_points) continue;
      label_rows[i].push_back(part_descriptor(field, column(probs, i)));
      matrices[i].row_shape.push_back(s);
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    if (!label_rows[i].empty()) matrices[i].rows = concat_rows(label_rows[i]);

  Var completeness = completeness_loss(maps);
  ev.record.completeness = completeness.item();
  Var group;
  bool any = std::any_of(matrices.begin(), matrices.end(), [](const auto& m) { return m.size() > 0; });
  if (any) {
    ConsistencyTerms terms = group_consistency_loss(matrices);
    ev.labels_present = terms.labels_present;
    ev.record.rank = terms.rank.item();
    ev.record.contrastive = terms.degenerate ? 0.0 : terms.contrastive.item();
    group = config.ablation == Ablation::kNoContrastive ? add_scalar(terms.rank, 1.0) : terms.energy;
  } else {
    Tensor one = Tensor::scalar(1.0);
    group = tape.constant(std::move(one));
  }
  const double lambda = config.ablation == Ablation::kNoCompleteness ? 0.0 : config.lambda;
  ev.objective = lambda > 0.0 ? add(group, scale(completeness, lambda)) : group;
  ev.record.total = ev.objective.item();
  return ev;
}

struct Attempt {
  std::vector<EnergyRecord> trace;
  CosegStatus status = CosegStatus::kMaxIterations;
  CosegWeights weights;
  std::string note;
};

Attempt run_attempt(const std::vector<PreparedShape>& shapes, const PriorClassifier& prior, const CosegConfig& config,
                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Attempt at;
  at.weights = make_coseg_weights(config.k, config.hidden, config.init_gain, rng);
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  AdamOptimizer optimizer(at.weights.parameters(), adam);
  for (Tensor* p : at.weights.parameters()) p->set_requires_grad(true);
  const auto starts = batch_starts(shapes.size(), config);
  const std::size_t batch = std::min(config.batch_size, shapes.size());
  // Compare like with like: the stopping window spans whole batch cycles.
  const std::size_t window = ((config.stop_window + starts.size() - 1) / starts.size()) * starts.size();
  std::size_t collapsed_for = 0;
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const std::size_t b0 = starts.size() == 1 ? 0 : starts[it % starts.size()];
    const std::size_t b1 = starts.size() == 1 ? shapes.size() : b0 + batch;
    Tape tape;
    BatchEval ev = evaluate_batch(tape, shapes, b0, b1, at.weights, prior, config);
    ev.record.iteration = it;
    at.trace.push_back(ev.record);
    collapsed_for = ev.labels_present < 2 ? collapsed_for + 1 : 0;
    if (collapsed_for >= config.collapse_window) {
      at.status = CosegStatus::kCollapsed;
      at.note = "fewer than 2 populated labels for " + std::to_string(collapsed_for) + " iterations";
      return at;
    }
    if (it >= window) {
      const double prev = at.trace[it - window].total;
      if (std::abs(ev.record.total - prev) <= config.stop_tolerance * std::max(std::abs(prev), 1e-12)) {
        at.status = CosegStatus::kConverged;
        return at;
      }
    }
    optimizer.zero_grad();
    tape.backward(ev.objective);
    optimizer.step();
  }
  return at;
}

}  // namespace

CosegResult cosegment(const std::vector<PreparedShape>& shapes, const PriorWeights& prior, const CosegConfig& config) {
  config.validate();
  if (shapes.size() < 2) throw ValidationError("cosegment: need at least 2 shapes");
  CosegResult result;
  Attempt at;
  for (std::size_t attempt = 0; attempt < 2; ++attempt) {
    result.seed_used = config.seed + attempt;
    result.restarts = attempt;
    at = run_attempt(shapes, prior.classifier, config, result.seed_used);
    if (at.status != CosegStatus::kCollapsed) break;
    result.diagnostics += "attempt " + std::to_string(attempt) + " (seed " + std::to_string(result.seed_used) +
                          "): " + at.note + "\n";
  }
  result.status = at.status;

  // Final maps and energy with the final weights.
  const auto starts = batch_starts(shapes.size(), config);
  const std::size_t batch = std::min(config.batch_size, shapes.size());
  std::vector<Tensor> probs(shapes.size());
  EnergyRecord final_record;
  for (std::size_t b = 0; b < starts.size(); ++b) {
    const std::size_t b0 = starts.size() == 1 ? 0 : starts[b];
    const std::size_t b1 = starts.size() == 1 ? shapes.size() : b0 + batch;
    Tape tape;
    BatchEval ev = evaluate_batch(tape, shapes, b0, b1, at.weights, prior.classifier, config);
    const double w = 1.0 / static_cast<double>(starts.size());
    final_record.rank += w * ev.record.rank;
    final_record.contrastive += w * ev.record.contrastive;
    final_record.completeness += w * ev.record.completeness;
    final_record.total += w * ev.record.total;
    for (std::size_t s = b0; s < b1; ++s) probs[s] = ev.probs[s - b0];
  }
  final_record.iteration = at.trace.size();
  result.trace = std::move(at.trace);
  result.trace.push_back(final_record);
  result.initial_energy = result.trace.front().total;
  result.final_energy = final_record.total;

  std::vector<bool> used(static_cast<std::size_t>(config.k), false);
  for (const auto& p : probs) {
    KWayLabeling lab;
    lab.k_bound = config.k;
    lab.labels = argmax_rows(p);
    for (int l : lab.labels) used[static_cast<std::size_t>(l)] = true;
    result.labelings.push_back(std::move(lab));
  }
  for (int l = 0; l < config.k; ++l)
    if (used[static_cast<std::size_t>(l)]) result.labels_used.push_back(l);
  return result;
}

CosegResult cosegment(const ShapeSet& set, const PriorWeights& prior, const CosegConfig& config) {
  set.validate();
  config.validate();
  return cosegment(prepare_shapes(set.shapes, prior), prior, config);
}

void write_energy_trace(const std::vector<EnergyRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write energy trace to " + path.string());
  out << "iteration,rank,contrastive,completeness,total\n";
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.rank, r.contrastive,
                  r.completeness, r.total);
    out << buf;
  }
}

}  // namespace groupseg
