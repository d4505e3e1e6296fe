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
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "json.hpp"
#include "nn.hpp"
#include "train.hpp"

namespace kdistill::eval {

// Infer-mode argmax, ties to the smallest class index.
std::vector<int> predict(const nn::ModelConfig& config, const nn::ParamSet& params,
                         std::span<const corpus::EncodedExample> examples);
// Encodes with the checkpoint's own vocabulary first.
std::vector<int> predict(const train::Checkpoint& model,
                         std::span<const corpus::RawExample> examples);
// `encoded_with` must equal the checkpoint vocabulary.
std::vector<int> predict(const train::Checkpoint& model,
                         std::span<const corpus::EncodedExample> examples,
                         const corpus::Vocabulary& encoded_with);

double accuracy(std::span<const int> pred, std::span<const int> truth);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0)
      : k_(num_classes), counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return k_; }
  // Rows are true classes, columns predicted classes.
  std::size_t at(int truth, int pred) const { return counts_[truth * k_ + pred]; }
  void add(int truth, int pred) { ++counts_[truth * k_ + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_sum(int truth) const;
  std::size_t col_sum(int pred) const;

 private:
  int k_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth,
                          int num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

// Per-class scores; an undefined ratio (zero denominator) counts as 0.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

// Unweighted mean of per-class F1.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes);

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
  std::size_t n = 0;
};

EvalReport evaluate(std::span<const int> pred, std::span<const int> truth,
                    int num_classes);

nlohmann::json to_json(const EvalReport& report);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};
MeanSd mean_sd(std::span<const double> values);

inline const std::vector<double> kDefaultLambdaGrid{0.08, 0.10, 0.12, 0.14,
                                                    0.16, 0.18, 0.20};

struct SweepReport {
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> accuracies;  // [lambda][replicate]
  std::vector<std::vector<double>> macro_f1;    // [lambda][replicate]
  std::vector<MeanSd> accuracy_stats;
  double spread = 0.0;  // max - min of per-lambda mean accuracy
};

// Distill-then-evaluate for every (lambda, replicate) cell; replicate r uses
// seed base.seed + r. Test-split accuracy is recorded. Cells may run on
// `threads` workers; results do not depend on the thread count.
SweepReport lambda_sweep(const train::TrainConfig& base, std::span<const double> grid,
                         int replicates, const corpus::DatasetSplit& data,
                         const corpus::SoftLabelSet& soft_labels, int threads = 1);

nlohmann::json to_json(const SweepReport& report);
std::string render_sweep_table(const SweepReport& report);

struct ModelLatency {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t params = 0;
};

struct LatencyReport {
  ModelLatency student;
  ModelLatency teacher;
  std::size_t batch_size = 0;
  int warmup = 0;
  int iterations = 0;
  double speedup = 0.0;  // teacher median / student median
};

// Wall-clock infer-mode forward passes on one thread; the two models are
// timed alternately. Encoding happens before timing.
LatencyReport latency_benchmark(const train::Checkpoint& student,
                                const train::Checkpoint& teacher,
                                std::span<const corpus::RawExample> batch, int warmup,
                                int iterations);

nlohmann::json to_json(const LatencyReport& report);

struct SizeEntry {
  std::string name;
  std::size_t params = 0;
  std::size_t bytes = 0;  // serialized checkpoint size
};

struct SizeReport {
  std::vector<SizeEntry> entries;
  // ratio[i][j] = params_i / params_j
  std::vector<std::vector<double>> param_ratio;
};

SizeEntry size_entry(const std::string& name, const train::Checkpoint& checkpoint);
SizeReport size_report(std::vector<SizeEntry> entries);
nlohmann::json to_json(const SizeReport& report);

// Mean +/- sd table in the layout: one row per dataset, one column per model,
// an Accuracy section followed by an F-1 section.
struct ComparisonRow {
  std::string dataset;
  std::vector<MeanSd> accuracy;  // one per model
  std::vector<MeanSd> f1;
};
std::string render_comparison_table(std::span<const std::string> models,
                                    std::span<const ComparisonRow> rows);

}  // namespace kdistill::eval
