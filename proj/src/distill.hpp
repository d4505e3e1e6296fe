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

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "corpus.hpp"
#include "nn.hpp"

namespace kdistill::distill {

using nn::Matrix;

// Probabilities are clamped here before taking logs; file-backed teachers
// may emit exact zeros.
inline constexpr double kLogClamp = 1e-12;

// Mean negative log-likelihood of the true class.
double hard_ce(const Matrix& probs, std::span<const int> labels);

// Mean cross entropy of student probabilities against teacher probabilities:
// -(1/B) sum_i sum_k P[i,k] log Q[i,k].
double soft_ce(const Matrix& probs, const Matrix& teacher);

// Mean Shannon entropy of the rows of `p` (natural log, 0 log 0 = 0).
double entropy(const Matrix& p);

struct LossBreakdown {
  double hard = 0.0;
  double soft = 0.0;
  double combined = 0.0;
  double lambda = 0.0;
};

// combined = hard_ce + lambda * soft_ce. `temperature` is reserved; only 1 is
// accepted.
LossBreakdown kd_loss(const Matrix& probs, std::span<const int> labels,
                      const Matrix& teacher, double lambda, double temperature = 1.0);

// Hard-label-only objective; soft is reported as 0.
LossBreakdown hard_loss(const Matrix& probs, std::span<const int> labels);

// Gradient of kd_loss w.r.t. the pre-softmax logits:
// row i = ((Q_i - onehot(y_i)) + lambda (Q_i - P_i)) / B.
Matrix kd_loss_grad_logits(const Matrix& probs, std::span<const int> labels,
                           const Matrix& teacher, double lambda,
                           double temperature = 1.0);
Matrix hard_loss_grad_logits(const Matrix& probs, std::span<const int> labels);

// Builds the B x K teacher matrix for a batch, in batch order. A batch id
// without a soft label is an error.
Matrix gather_soft_labels(const corpus::SoftLabelSet& soft,
                          std::span<const corpus::EncodedExample> batch);

std::vector<int> labels_of(std::span<const corpus::EncodedExample> batch);

nn::LossFunction hard_ce_objective(std::vector<int> labels);
nn::LossFunction kd_objective(std::vector<int> labels, Matrix teacher, double lambda);

struct FileBackedTeacher {
  corpus::SoftLabelSet soft_labels;
};

struct BuiltinTeacher {
  nn::ModelConfig config;
  nn::ParamSet params;
  corpus::Vocabulary vocab;
};

using TeacherSource = std::variant<FileBackedTeacher, BuiltinTeacher>;

// Soft labels for `examples`. File-backed teachers are restricted to the
// example ids; built-in teachers run infer-mode forward passes after encoding
// with their own vocabulary.
corpus::SoftLabelSet generate_soft_labels(const TeacherSource& teacher,
                                          std::span<const corpus::RawExample> examples,
                                          int num_classes);

// Built-in teacher over pre-encoded examples; `encoded_with` must be the
// teacher's vocabulary.
corpus::SoftLabelSet generate_soft_labels(const BuiltinTeacher& teacher,
                                          std::span<const corpus::EncodedExample> examples,
                                          const corpus::Vocabulary& encoded_with);

}  // namespace kdistill::distill
