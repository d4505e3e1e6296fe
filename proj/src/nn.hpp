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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "rng.hpp"

namespace kdistill::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Embedding -> BiLSTM -> global max pool -> dense(relu) -> dense(softmax).
struct ModelConfig {
  int vocab_size = 512;
  int embed_dim = 32;
  int lstm_units = 16;
  int dense_units = 16;
  int num_classes = 5;
  double dropout_embed = 0.3;
  double dropout_dense = 0.3;
  int max_len = 64;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  static ModelConfig student(int num_classes);
  // Same topology scaled up; used as the built-in teacher.
  static ModelConfig teacher(int num_classes);
};

std::size_t param_count(const ModelConfig& config);

struct ParamBlock {
  std::string name;
  std::span<double> values;
  Eigen::Index rows;
  Eigen::Index cols;
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
  Eigen::Index rows;
  Eigen::Index cols;
};

struct LstmParams {
  Matrix input_weights;      // 4H x E, gate order (i, f, g, o)
  Matrix recurrent_weights;  // 4H x H
  RowVector bias;            // 4H
};

// Every trainable tensor of the model. Doubles as the gradient container.
struct ParamSet {
  Matrix embedding;  // V x E
  LstmParams forward;
  LstmParams backward;
  Matrix dense_weights;  // 2H x D
  RowVector dense_bias;  // D
  Matrix output_weights;  // D x K
  RowVector output_bias;  // K

  static ParamSet zeros(const ModelConfig& config);

  // Fixed order: embedding, forward LSTM, backward LSTM, dense, output.
  std::vector<ParamBlock> blocks();
  std::vector<ConstParamBlock> blocks() const;
  std::size_t size() const;
  bool same_shape(const ParamSet& other) const;
  void set_zero();
};

using GradSet = ParamSet;

ParamSet init_params(const ModelConfig& config, std::uint64_t seed);

enum class Mode { kTrain, kInfer };

struct DirectionCache {
  std::vector<Matrix> inputs;  // per step, B x E
  std::vector<Matrix> gates;   // per step, B x 4H, post-activation
  std::vector<Matrix> cell;    // per step, B x H
  std::vector<Matrix> cell_tanh;
  std::vector<Matrix> hidden;
};

struct ForwardCache {
  Mode mode = Mode::kInfer;
  int batch = 0;
  int steps = 0;
  std::vector<int> lengths;
  IndexMatrix tokens;                // B x steps
  std::vector<Matrix> embed_mask;    // per position; empty without dropout
  DirectionCache fwd;
  DirectionCache bwd;
  IndexMatrix pool_step;             // B x 2H, winning step per feature
  Matrix pooled;                     // B x 2H
  Matrix dense_pre;                  // B x D, before relu
  Matrix dense_mask;                 // B x D; empty without dropout
  Matrix dense_out;                  // B x D, after relu and dropout
  Matrix logits;                     // B x K
};

struct ForwardResult {
  Matrix probs;  // B x K
  ForwardCache cache;
};

// `rng` supplies dropout masks and is only read in train mode.
ForwardResult forward(const ModelConfig& config, const ParamSet& params,
                      std::span<const corpus::EncodedExample> batch, Mode mode,
                      Rng* rng = nullptr);

GradSet backward(const ModelConfig& config, const ParamSet& params,
                 const ForwardCache& cache, const Matrix& grad_logits);

// Row-wise softmax with the row max subtracted first.
Matrix softmax_stable(const Matrix& logits);

// Scalar loss of the output probabilities plus its gradient w.r.t. logits.
struct LossFunction {
  std::function<double(const Matrix& probs)> value;
  std::function<Matrix(const Matrix& probs)> grad_logits;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

inline constexpr double kGradCheckEpsilon = 1e-5;

// Central differences over every parameter, dropout disabled.
// Relative error: |a - n| / max(1e-8, |a| + |n|).
GradCheckResult gradient_check(const ModelConfig& config, const ParamSet& params,
                               std::span<const corpus::EncodedExample> batch,
                               const LossFunction& loss,
                               double epsilon = kGradCheckEpsilon);
// Seeded form: probes a random parameter point with every entry in U(-1, 1).
GradCheckResult gradient_check(const ModelConfig& config,
                               std::span<const corpus::EncodedExample> batch,
                               const LossFunction& loss, double epsilon,
                               std::uint64_t seed);

}  // namespace kdistill::nn

namespace kdistill::nn {

// Row-wise argmax; ties resolve to the smallest class index.
std::vector<int> argmax_rows(const Matrix& probs);

// Infer-mode class probabilities for a whole dataset, evaluated in chunks.
Matrix predict_proba(const ModelConfig& config, const ParamSet& params,
                     std::span<const corpus::EncodedExample> examples,
                     std::size_t chunk = 256);

}  // namespace kdistill::nn
