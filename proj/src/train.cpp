/* Copyright 2026 The kdistill Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace kdistill::train {

namespace {

enum StreamTag : std::uint64_t {
  kInitStream = 0x1a17,
  kShuffleStream = 0x5f1e,
  kDropoutStream = 0xd40f,
};

std::vector<corpus::EncodedExample> gather(const std::vector<corpus::EncodedExample>& all,
                                           std::span<const std::size_t> index) {
  std::vector<corpus::EncodedExample> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(all[i]);
  return out;
}

}  // namespace

AdamState AdamState::zeros(const nn::ModelConfig& config) {
  return {nn::ParamSet::zeros(config), nn::ParamSet::zeros(config), 0};
}

void check_finite(const nn::GradSet& grads) {
  for (const auto& b : grads.blocks()) {
    for (std::size_t k = 0; k < b.values.size(); ++k) {
      if (!std::isfinite(b.values[k])) {
        throw TrainingError("non-finite gradient in parameter block '" + b.name +
                            "' at index " + std::to_string(k));
      }
    }
  }
}

void adam_step(nn::ParamSet& params, const nn::GradSet& grads, AdamState& state,
               const AdamHyper& hyper) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) ||
      !params.same_shape(state.v)) {
    throw UsageError("adam_step: parameter, gradient and state shapes differ");
  }
  check_finite(grads);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  auto p_blocks = params.blocks();
  const auto g_blocks = grads.blocks();
  auto m_blocks = state.m.blocks();
  auto v_blocks = state.v.blocks();
  for (std::size_t bi = 0; bi < p_blocks.size(); ++bi) {
    auto p = p_blocks[bi].values;
    const auto g = g_blocks[bi].values;
    auto m = m_blocks[bi].values;
    auto v = v_blocks[bi].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

double clip_global_norm(nn::GradSet& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& b : std::as_const(grads).blocks()) {
    for (double x : b.values) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& b : grads.blocks()) {
      for (double& x : b.values) x *= scale;
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  if (!(adam.learning_rate > 0.0) || !(adam.epsilon > 0.0) || !(adam.beta1 >= 0.0) ||
      !(adam.beta1 < 1.0) || !(adam.beta2 >= 0.0) || !(adam.beta2 < 1.0)) {
    throw UsageError("invalid Adam hyperparameters");
  }
  if (batch_size < 1 || max_epochs < 1 || patience < 0 || !(min_delta >= 0.0)) {
    throw UsageError("batch_size and max_epochs must be positive, patience >= 0");
  }
}

Evaluation evaluate_loss(const nn::ModelConfig& config, const nn::ParamSet& params,
                         std::span<const corpus::EncodedExample> examples) {
  if (examples.empty()) throw DataError("cannot evaluate an empty split");
  const nn::Matrix q = nn::predict_proba(config, params, examples);
  const auto labels = distill::labels_of(examples);
  const auto pred = nn::argmax_rows(q);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += pred[i] == labels[i];
  return {distill::hard_ce(q, labels),
          static_cast<double>(correct) / static_cast<double>(labels.size())};
}

TrainResult train_model(const TrainConfig& config, const corpus::DatasetSplit& split,
                        const corpus::SoftLabelSet* soft_labels,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw DataError("training split is empty");
  if (split.validation.empty()) throw DataError("validation split is empty");
  if (soft_labels) {
    if (soft_labels->num_classes() != config.model.num_classes) {
      throw DataError("soft labels have " + std::to_string(soft_labels->num_classes()) +
                      " classes, model has " + std::to_string(config.model.num_classes));
    }
    for (const auto& ex : split.train) {
      if (!soft_labels->contains(ex.id)) {
        throw DataError("soft labels do not cover training example '" + ex.id + "'");
      }
    }
  }
  const double lambda = soft_labels ? config.lambda : 0.0;

  TrainResult result{nn::init_params(config.model, derive_seed(config.seed, kInitStream)),
                     {}};
  nn::ParamSet& params = result.params;
  TrainReport& report = result.report;
  report.lambda = lambda;
  AdamState adam = AdamState::zeros(config.model);

  nn::ParamSet best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  int wait = 0;
  report.stop_reason = "max_epochs";

  std::vector<std::size_t> order(split.train.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    Rng dropout_rng(derive_seed(config.seed, kDropoutStream, epoch));

    distill::LossBreakdown epoch_loss;
    epoch_loss.lambda = lambda;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count =
          std::min<std::size_t>(config.batch_size, order.size() - start);
      const auto batch =
          gather(split.train, std::span<const std::size_t>(order).subspan(start, count));
      const auto labels = distill::labels_of(batch);
      auto fwd = nn::forward(config.model, params, batch, nn::Mode::kTrain, &dropout_rng);

      distill::LossBreakdown loss;
      nn::Matrix grad_logits;
      if (soft_labels) {
        const nn::Matrix teacher = distill::gather_soft_labels(*soft_labels, batch);
        loss = distill::kd_loss(fwd.probs, labels, teacher, lambda);
        grad_logits = distill::kd_loss_grad_logits(fwd.probs, labels, teacher, lambda);
      } else {
        loss = distill::hard_loss(fwd.probs, labels);
        grad_logits = distill::hard_loss_grad_logits(fwd.probs, labels);
      }
      const double weight = static_cast<double>(count);
      epoch_loss.hard += loss.hard * weight;
      epoch_loss.soft += loss.soft * weight;
      epoch_loss.combined += loss.combined * weight;

      nn::GradSet grads = nn::backward(config.model, params, fwd.cache, grad_logits);
      check_finite(grads);
      clip_global_norm(grads, config.clip_norm);
      adam_step(params, grads, adam, config.adam);
    }
    const double n = static_cast<double>(order.size());
    epoch_loss.hard /= n;
    epoch_loss.soft /= n;
    epoch_loss.combined /= n;

    const Evaluation val = evaluate_loss(config.model, params, split.validation);
    if (!std::isfinite(val.loss)) {
      throw TrainingError("validation loss became non-finite at epoch " +
                          std::to_string(epoch));
    }
    EpochRecord record{epoch, epoch_loss, val.loss, val.accuracy};
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    // The best epoch is the exact argmin; only improvements of at least
    // min_delta reset the patience counter.
    const bool significant = val.loss < best_loss - config.min_delta;
    if (val.loss < best_loss) {
      best_loss = val.loss;
      best_params = params;
      report.best_epoch = epoch;
      report.best_val_loss = val.loss;
    }
    if (significant) {
      wait = 0;
    } else if (++wait >= config.patience) {
      report.stop_reason = "early_stopping";
      break;
    }
  }
  params = std::move(best_params);
  return result;
}

TrainResult train_teacher(const TrainConfig& config, const corpus::DatasetSplit& split,
                          const EpochCallback& on_epoch) {
  TrainConfig cfg = config;
  cfg.lambda = 0.0;
  return train_model(cfg, split, nullptr, on_epoch);
}

}  // namespace kdistill::train
