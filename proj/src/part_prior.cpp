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

#include "groupseg/part_prior.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <random>

#include "groupseg/checkpoint.hpp"
#include "groupseg/error.hpp"

namespace groupseg {

namespace {

constexpr std::size_t kHidden = 128;

Tensor mask_column(const BinaryMask& mask) {
  Tensor t = Tensor::matrix(mask.size(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i] ? 1.0 : 0.0;
  return t;
}

std::vector<int> mask_targets(const BinaryMask& mask) {
  std::vector<int> t(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i] ? 1 : 0;
  return t;
}

double draw_rate(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

std::vector<Tensor*> PriorClassifier::parameters() {
  std::vector<Tensor*> out{&point_weight, &fg_weight, &bias};
  for (Tensor* p : groupseg::parameters(tail)) out.push_back(p);
  return out;
}

void PriorClassifier::set_requires_grad(bool on) {
  point_weight.set_requires_grad(on);
  fg_weight.set_requires_grad(on);
  bias.set_requires_grad(on);
  groupseg::set_requires_grad(tail, on);
}

void PriorClassifier::validate() const {
  const bool ok = point_weight.rows() == kFeatureWidth && fg_weight.rows() == kFeatureWidth &&
                  point_weight.cols() == fg_weight.cols() && bias.size() == point_weight.cols() && !tail.empty() &&
                  tail.front().in_width() == point_weight.cols() && tail.back().out_width() == 2;
  if (!ok) throw ValidationError("prior classifier: expected [128 + 128] → … → 2 layout");
}

std::vector<Tensor*> PriorWeights::parameters() {
  std::vector<Tensor*> out = msg.parameters();
  for (Tensor* p : mrg.parameters()) out.push_back(p);
  for (Tensor* p : classifier.parameters()) out.push_back(p);
  return out;
}

void PriorWeights::set_requires_grad(bool on) {
  msg.set_requires_grad(on);
  mrg.set_requires_grad(on);
  classifier.set_requires_grad(on);
}

void PriorWeights::validate() const {
  msg.validate();
  mrg.validate();
  classifier.validate();
  if (msg.kind != FeatureKind::kMsg || mrg.kind != FeatureKind::kMrg) throw ValidationError("prior: encoder kinds swapped");
}

PriorWeights make_prior(const EncoderConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PriorWeights w;
  w.msg = make_encoder(FeatureKind::kMsg, config, rng);
  w.mrg = make_encoder(FeatureKind::kMrg, config, rng);
  // He-uniform over the full 256-wide input of the first layer.
  Mlp first = make_mlp({2 * kFeatureWidth, kHidden}, Activation::kRelu, Activation::kRelu, rng);
  w.classifier.point_weight = Tensor::matrix(kFeatureWidth, kHidden);
  w.classifier.fg_weight = Tensor::matrix(kFeatureWidth, kHidden);
  for (std::size_t r = 0; r < kFeatureWidth; ++r) {
    for (std::size_t c = 0; c < kHidden; ++c) {
      w.classifier.point_weight(r, c) = first[0].weight(r, c);
      w.classifier.fg_weight(r, c) = first[0].weight(kFeatureWidth + r, c);
    }
  }
  w.classifier.bias = Tensor::matrix(1, kHidden);
  w.classifier.tail = make_mlp({kHidden, kHidden, 2}, Activation::kRelu, Activation::kNone, rng);
  w.set_requires_grad(true);
  return w;
}

void save_prior(const PriorWeights& weights, const std::filesystem::path& path) {
  weights.validate();
  Checkpoint ckpt;
  ckpt.meta["model"] = "part-prior";
  write_encoder(ckpt, "msg", weights.msg);
  write_encoder(ckpt, "mrg", weights.mrg);
  ckpt.tensors.emplace_back("classifier.point_weight", weights.classifier.point_weight);
  ckpt.tensors.emplace_back("classifier.fg_weight", weights.classifier.fg_weight);
  ckpt.tensors.emplace_back("classifier.bias", weights.classifier.bias);
  write_mlp(ckpt, "classifier.tail", weights.classifier.tail);
  save_checkpoint(ckpt, path);
}

PriorWeights load_prior(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta_value("model") != "part-prior") throw ValidationError("checkpoint is not a part prior");
  PriorWeights w;
  w.msg = read_encoder(ckpt, "msg");
  w.mrg = read_encoder(ckpt, "mrg");
  w.classifier.point_weight = ckpt.tensor("classifier.point_weight");
  w.classifier.fg_weight = ckpt.tensor("classifier.fg_weight");
  w.classifier.bias = ckpt.tensor("classifier.bias");
  w.classifier.tail = read_mlp(ckpt, "classifier.tail");
  w.validate();
  w.set_requires_grad(true);
  return w;
}

ShapeEncoding encode_shape(const PointCloud& cloud, PriorWeights& weights) {
  ShapeEncoding enc;
  enc.groups = build_groups(cloud, weights.msg.config);
  enc.msg = encode_field(cloud, enc.groups, weights.msg).features;
  enc.mrg = encode_field(cloud, enc.groups, weights.mrg).features;
  return enc;
}

Var foreground_descriptor(Var msg_field, Var mask_weights) { return weighted_mean_rows(msg_field, mask_weights); }

Tensor foreground_descriptor(const PointCloud& cloud, const BinaryMask& mask, PriorWeights& weights) {
  if (mask.size() != cloud.size()) throw ValidationError("foreground_descriptor: mask length mismatch");
  if (mask.foreground_count() == 0) throw EmptyForegroundError("foreground_descriptor: empty foreground");
  Tape tape;
  Var msg = tape.constant(msg_encode(cloud, weights.msg).features);
  return foreground_descriptor(msg, tape.constant(mask_column(mask))).value();
}

Var prior_point_term(Var mrg_field, PriorClassifier& classifier) {
  return matmul(mrg_field, mrg_field.tape->parameter(classifier.point_weight));
}

Var prior_logits(Var point_term, Var fg_descriptor, PriorClassifier& classifier) {
  Tape& tape = *point_term.tape;
  Var fg_term = linear(fg_descriptor, tape.parameter(classifier.fg_weight), tape.parameter(classifier.bias));
  Var hidden = relu(add_row(point_term, fg_term));
  return mlp_forward(hidden, classifier.tail);
}

std::vector<double> denoise(const ShapeEncoding& enc, const BinaryMask& noisy_mask, PriorWeights& weights) {
  const std::size_t n = enc.msg.rows();
  if (noisy_mask.size() != n) throw ValidationError("denoise: mask length mismatch");
  if (noisy_mask.foreground_count() == 0) {
    std::clog << "denoise: empty foreground, part vanishes\n";
    return std::vector<double>(n, 0.0);
  }
  Tape tape;
  Var msg = tape.constant(enc.msg);
  Var mrg = tape.constant(enc.mrg);
  Var fg = foreground_descriptor(msg, tape.constant(mask_column(noisy_mask)));
  Var probs = softmax_rows(prior_logits(prior_point_term(mrg, weights.classifier), fg, weights.classifier));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = probs.value()(i, 1);
  return out;
}

std::vector<double> denoise(const PointCloud& cloud, const BinaryMask& noisy_mask, PriorWeights& weights) {
  if (noisy_mask.size() != cloud.size()) throw ValidationError("denoise: mask length mismatch");
  return denoise(encode_shape(cloud, weights), noisy_mask, weights);
}

std::vector<BinaryMask> part_masks(const KWayLabeling& labeling) {
  std::vector<BinaryMask> out;
  for (int l : labeling.labels_used()) {
    BinaryMask m = mask_for_label(labeling, l);
    const auto fg = m.foreground_count();
    if (fg > 0 && fg < m.size()) out.push_back(std::move(m));
  }
  return out;
}

double denoise_accuracy(const std::vector<double>& probabilities, const BinaryMask& clean) {
  if (probabilities.size() != clean.size() || clean.size() == 0) throw ValidationError("denoise_accuracy: length mismatch");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) ok += (probabilities[i] > 0.5) == clean[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(clean.size());
}

namespace {

struct MaskSample {
  std::size_t shape = 0;
  BinaryMask noisy;
  BinaryMask clean;
};

MaskSample draw_sample(const std::vector<PartExample>& data, std::size_t shape, const PriorTrainConfig& cfg,
                       std::mt19937_64& rng) {
  const auto& ex = data[shape];
  const auto part = std::uniform_int_distribution<std::size_t>(0, ex.parts.size() - 1)(rng);
  CorruptionSpec spec;
  spec.insert_rate = draw_rate(rng, cfg.rate_lo, cfg.rate_hi);
  spec.delete_rate = draw_rate(rng, cfg.rate_lo, cfg.rate_hi);
  spec.seed = rng();
  return MaskSample{shape, corrupt_mask(ex.cloud, ex.parts[part], spec), ex.parts[part]};
}

Var sample_loss(Var msg, Var point_term, const MaskSample& s, PriorClassifier& cls) {
  Tape& tape = *msg.tape;
  Var fg = foreground_descriptor(msg, tape.constant(mask_column(s.noisy)));
  Var probs = softmax_rows(prior_logits(point_term, fg, cls));
  const auto targets = mask_targets(s.clean);
  return nll_loss(probs, targets);
}

}  // namespace

PriorTrainResult train_prior(const std::vector<PartExample>& dataset, const PriorTrainConfig& config,
                             const ProgressFn& progress) {
  return train_prior(make_prior(config.encoder, config.seed), dataset, config, progress);
}

PriorTrainResult train_prior(PriorWeights weights, const std::vector<PartExample>& dataset,
                             const PriorTrainConfig& config, const ProgressFn& progress) {
  if (dataset.empty()) throw ValidationError("train_prior: empty dataset");
  if (config.batch == 0) throw ValidationError("train_prior: batch must be positive");
  if (config.rate_lo < 0.0 || config.rate_hi > 0.5 || config.rate_lo > config.rate_hi) {
    throw ValidationError("train_prior: corruption rate range must lie within [0, 0.5]");
  }
  if (!(config.final_lr_fraction > 0.0 && config.final_lr_fraction <= 1.0))
    throw ValidationError("train_prior: final learning-rate fraction must lie in (0, 1]");
  for (const auto& ex : dataset) {
    if (ex.parts.empty()) throw ValidationError("train_prior: shape '" + ex.cloud.id + "' has no part masks");
    for (const auto& m : ex.parts) {
      if (m.size() != ex.cloud.size()) throw ValidationError("train_prior: mask length mismatch");
      if (m.foreground_count() == 0) throw ValidationError("train_prior: empty clean foreground");
    }
  }
  weights.validate();
  weights.set_requires_grad(true);

  std::vector<CloudGroups> groups;
  groups.reserve(dataset.size());
  for (const auto& ex : dataset) groups.push_back(build_groups(ex.cloud, weights.msg.config));

  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::mt19937_64 val_rng(config.seed ^ 0xA5A5A5A5ULL);
  std::vector<MaskSample> validation;
  for (std::size_t i = 0; i < config.validation_masks; ++i) {
    const auto shape = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(val_rng);
    validation.push_back(draw_sample(dataset, shape, config, val_rng));
  }
  auto validation_loss = [&]() {
    double total = 0.0;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      bool any = false;
      for (const auto& v : validation) any = any || v.shape == s;
      if (!any) continue;
      Tape tape;
      Var msg = tape.constant(encode(tape, groups[s], weights.msg).value());
      Var mrg = tape.constant(encode(tape, groups[s], weights.mrg).value());
      Var pt = tape.constant(prior_point_term(mrg, weights.classifier).value());
      for (const auto& v : validation)
        if (v.shape == s) total += sample_loss(msg, pt, v, weights.classifier).item();
    }
    return validation.empty() ? 0.0 : total / static_cast<double>(validation.size());
  };

  PriorTrainResult result;
  AdamOptimizer opt(weights.parameters(), config.adam);
  double running = 0.0;
  std::size_t running_n = 0;
  auto log = [&](std::size_t step) {
    TrainLogEntry e{step, running_n ? running / static_cast<double>(running_n) : 0.0, validation_loss()};
    result.curve.push_back(e);
    if (progress) progress(e);
    running = 0.0;
    running_n = 0;
  };
  log(0);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    if (config.cosine_decay) {
      const double progress_frac = static_cast<double>(step - 1) / static_cast<double>(config.steps);
      const double f = config.final_lr_fraction +
                       (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress_frac));
      opt.set_learning_rate(config.adam.learning_rate * f);
    }
    const auto shape = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(rng);
    Tape tape;
    Var msg = encode(tape, groups[shape], weights.msg);
    Var mrg = encode(tape, groups[shape], weights.mrg);
    Var pt = prior_point_term(mrg, weights.classifier);
    Var total;
    for (std::size_t b = 0; b < config.batch; ++b) {
      Var l = sample_loss(msg, pt, draw_sample(dataset, shape, config, rng), weights.classifier);
      total = total.valid() ? add(total, l) : l;
    }
    total = scale(total, 1.0 / static_cast<double>(config.batch));
    running += total.item();
    ++running_n;
    tape.backward(total);
    opt.step();
    if (config.log_every > 0 && (step % config.log_every == 0 || step == config.steps)) log(step);
  }
  result.weights = std::move(weights);
  return result;
}

}  // namespace groupseg
