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

#include "distill.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace kdistill::distill {

namespace {

constexpr std::size_t kInferBatch = 256;

void check_labels(const Matrix& probs, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw UsageError("label count " + std::to_string(labels.size()) +
                     " does not match batch size " + std::to_string(probs.rows()));
  }
  for (int y : labels) {
    if (y < 0 || y >= probs.cols()) {
      throw DataError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(probs.cols()) + ")");
    }
  }
}

void check_teacher(const Matrix& probs, const Matrix& teacher) {
  if (teacher.rows() != probs.rows() || teacher.cols() != probs.cols()) {
    throw UsageError("teacher probabilities are misaligned with the batch");
  }
  for (Eigen::Index i = 0; i < teacher.rows(); ++i) {
    corpus::validate_probabilities(
        "row " + std::to_string(i),
        std::span<const double>(teacher.row(i).data(), teacher.cols()),
        static_cast<int>(teacher.cols()));
  }
}

void check_temperature(double temperature) {
  if (temperature != 1.0) {
    throw UsageError("temperature other than 1 is not supported");
  }
}

double clamped_log(double q) { return std::log(std::max(q, kLogClamp)); }

}  // namespace

double hard_ce(const Matrix& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) sum -= clamped_log(probs(i, labels[i]));
  return sum / static_cast<double>(probs.rows());
}

double soft_ce(const Matrix& probs, const Matrix& teacher) {
  check_teacher(probs, teacher);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      sum -= teacher(i, k) * clamped_log(probs(i, k));
    }
  }
  return sum / static_cast<double>(probs.rows());
}

double entropy(const Matrix& p) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      if (p(i, k) > 0.0) sum -= p(i, k) * std::log(p(i, k));
    }
  }
  return sum / static_cast<double>(p.rows());
}

LossBreakdown kd_loss(const Matrix& probs, std::span<const int> labels,
                      const Matrix& teacher, double lambda, double temperature) {
  check_temperature(temperature);
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  LossBreakdown out;
  out.lambda = lambda;
  out.hard = hard_ce(probs, labels);
  out.soft = soft_ce(probs, teacher);
  out.combined = out.hard + lambda * out.soft;
  return out;
}

LossBreakdown hard_loss(const Matrix& probs, std::span<const int> labels) {
  LossBreakdown out;
  out.hard = hard_ce(probs, labels);
  out.combined = out.hard;
  return out;
}

Matrix kd_loss_grad_logits(const Matrix& probs, std::span<const int> labels,
                           const Matrix& teacher, double lambda, double temperature) {
  check_temperature(temperature);
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  check_labels(probs, labels);
  check_teacher(probs, teacher);
  Matrix grad = probs - teacher;
  grad *= lambda;
  grad += probs;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) grad(i, labels[i]) -= 1.0;
  grad /= static_cast<double>(probs.rows());
  return grad;
}

Matrix hard_loss_grad_logits(const Matrix& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  Matrix grad = probs;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) grad(i, labels[i]) -= 1.0;
  grad /= static_cast<double>(probs.rows());
  return grad;
}

Matrix gather_soft_labels(const corpus::SoftLabelSet& soft,
                          std::span<const corpus::EncodedExample> batch) {
  Matrix out(static_cast<Eigen::Index>(batch.size()), soft.num_classes());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& probs = soft.at(batch[i].id);
    for (int k = 0; k < soft.num_classes(); ++k) {
      out(static_cast<Eigen::Index>(i), k) = probs[k];
    }
  }
  return out;
}

std::vector<int> labels_of(std::span<const corpus::EncodedExample> batch) {
  std::vector<int> out;
  out.reserve(batch.size());
  for (const auto& ex : batch) out.push_back(ex.label);
  return out;
}

nn::LossFunction hard_ce_objective(std::vector<int> labels) {
  return {[labels](const Matrix& q) { return hard_ce(q, labels); },
          [labels](const Matrix& q) { return hard_loss_grad_logits(q, labels); }};
}

nn::LossFunction kd_objective(std::vector<int> labels, Matrix teacher, double lambda) {
  return {[=](const Matrix& q) { return kd_loss(q, labels, teacher, lambda).combined; },
          [=](const Matrix& q) {
            return kd_loss_grad_logits(q, labels, teacher, lambda);
          }};
}

corpus::SoftLabelSet generate_soft_labels(
    const BuiltinTeacher& teacher, std::span<const corpus::EncodedExample> examples,
    const corpus::Vocabulary& encoded_with) {
  if (!(encoded_with == teacher.vocab)) {
    throw DataError("examples were encoded with a vocabulary other than the teacher's");
  }
  corpus::SoftLabelSet out(teacher.config.num_classes);
  for (std::size_t start = 0; start < examples.size(); start += kInferBatch) {
    const auto batch =
        examples.subspan(start, std::min(kInferBatch, examples.size() - start));
    const Matrix q =
        nn::forward(teacher.config, teacher.params, batch, nn::Mode::kInfer).probs;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto row = q.row(static_cast<Eigen::Index>(i));
      out.insert(batch[i].id, std::vector<double>(row.data(), row.data() + row.size()));
    }
  }
  return out;
}

corpus::SoftLabelSet generate_soft_labels(const TeacherSource& teacher,
                                          std::span<const corpus::RawExample> examples,
                                          int num_classes) {
  if (const auto* file = std::get_if<FileBackedTeacher>(&teacher)) {
    if (file->soft_labels.num_classes() != num_classes) {
      throw DataError("soft labels have " +
                      std::to_string(file->soft_labels.num_classes()) +
                      " classes, dataset has " + std::to_string(num_classes));
    }
    std::vector<std::string> ids;
    ids.reserve(examples.size());
    for (const auto& ex : examples) ids.push_back(ex.id);
    return file->soft_labels.restrict_to(ids);
  }
  const auto& builtin = std::get<BuiltinTeacher>(teacher);
  if (builtin.config.num_classes != num_classes) {
    throw DataError("teacher predicts " + std::to_string(builtin.config.num_classes) +
                    " classes, dataset has " + std::to_string(num_classes));
  }
  const auto encoded =
      corpus::encode_all(examples, builtin.vocab, builtin.config.max_len);
  return generate_soft_labels(builtin, encoded, builtin.vocab);
}

}  // namespace kdistill::distill
