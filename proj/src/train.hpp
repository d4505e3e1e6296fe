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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "distill.hpp"
#include "json.hpp"
#include "nn.hpp"

namespace kdistill::train {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  nn::ParamSet m;
  nn::ParamSet v;
  std::uint64_t step = 0;

  static AdamState zeros(const nn::ModelConfig& config);
};

// Throws TrainingError naming the first block holding a NaN or infinity.
void check_finite(const nn::GradSet& grads);

// One bias-corrected Adam update, in place.
void adam_step(nn::ParamSet& params, const nn::GradSet& grads, AdamState& state,
               const AdamHyper& hyper);

// Scales grads so their global L2 norm is at most max_norm (no-op when
// max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(nn::GradSet& grads, double max_norm);

struct TrainConfig {
  double lambda = 0.2;
  AdamHyper adam;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 5;
  double min_delta = 1e-5;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  nn::ModelConfig model;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  distill::LossBreakdown train;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::string stop_reason;  // "early_stopping" or "max_epochs"
  double lambda = 0.0;      // effective lambda (0 without soft labels)
};

struct TrainResult {
  nn::ParamSet params;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam with early stopping on validation hard cross entropy; the
// best epoch's parameters are returned. Without soft labels lambda is forced
// to 0.
TrainResult train_model(const TrainConfig& config, const corpus::DatasetSplit& split,
                        const corpus::SoftLabelSet* soft_labels,
                        const EpochCallback& on_epoch = {});

// Hard-label training (lambda = 0) of the configured model.
TrainResult train_teacher(const TrainConfig& config, const corpus::DatasetSplit& split,
                          const EpochCallback& on_epoch = {});

// Mean hard cross entropy and accuracy in infer mode.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
Evaluation evaluate_loss(const nn::ModelConfig& config, const nn::ParamSet& params,
                         std::span<const corpus::EncodedExample> examples);

// --- Checkpoints -------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  nn::ModelConfig model;
  corpus::Vocabulary vocab;
  corpus::LabelSpace labels;
  nn::ParamSet params;
  TrainConfig train_config;
  TrainReport history;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws DataError on a bad magic line, version mismatch or checksum mismatch.
Checkpoint parse_checkpoint(std::string_view content);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Exact decimal form used for parameter blocks (17 significant digits).
std::string format_double(double value);

}  // namespace kdistill::train

namespace kdistill::nn {
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
}  // namespace kdistill::nn

namespace kdistill::distill {
void to_json(nlohmann::json& j, const LossBreakdown& l);
void from_json(const nlohmann::json& j, LossBreakdown& l);
}  // namespace kdistill::distill

namespace kdistill::corpus {
void to_json(nlohmann::json& j, const LabelSpace& l);
void from_json(const nlohmann::json& j, LabelSpace& l);
}  // namespace kdistill::corpus

namespace kdistill::train {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);
void to_json(nlohmann::json& j, const TrainReport& r);
void from_json(const nlohmann::json& j, TrainReport& r);
}  // namespace kdistill::train
