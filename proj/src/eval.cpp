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

#include "eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "error.hpp"

namespace kdistill::eval {

namespace {

void check_pair(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw UsageError("prediction count " + std::to_string(pred.size()) +
                     " differs from label count " + std::to_string(truth.size()));
  }
}

void check_range(std::span<const int> labels, int k) {
  for (int y : labels) {
    if (y < 0 || y >= k) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) +
                      ")");
    }
  }
}

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::string fmt(const char* pattern, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string pad_right(std::string s, std::size_t width) {
  // Counts UTF-8 code points so "±" occupies one column.
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xc0) != 0x80;
  if (cols < width) s.append(width - cols, ' ');
  return s;
}

}  // namespace

std::vector<int> predict(const nn::ModelConfig& config, const nn::ParamSet& params,
                         std::span<const corpus::EncodedExample> examples) {
  return nn::argmax_rows(nn::predict_proba(config, params, examples));
}

std::vector<int> predict(const train::Checkpoint& model,
                         std::span<const corpus::RawExample> examples) {
  const auto encoded = corpus::encode_all(examples, model.vocab, model.model.max_len);
  return predict(model.model, model.params, encoded);
}

std::vector<int> predict(const train::Checkpoint& model,
                         std::span<const corpus::EncodedExample> examples,
                         const corpus::Vocabulary& encoded_with) {
  if (!(encoded_with == model.vocab)) {
    throw DataError("examples were encoded with a vocabulary other than the model's");
  }
  return predict(model.model, model.params, examples);
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_pair(pred, truth);
  if (pred.empty()) throw UsageError("accuracy of an empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (int k = 0; k < k_; ++k) t += at(k, k);
  return t;
}

std::size_t ConfusionMatrix::row_sum(int truth) const {
  std::size_t s = 0;
  for (int p = 0; p < k_; ++p) s += at(truth, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(int pred) const {
  std::size_t s = 0;
  for (int t = 0; t < k_; ++t) s += at(t, pred);
  return s;
}

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth,
                          int num_classes) {
  check_pair(pred, truth);
  check_range(pred, num_classes);
  check_range(truth, num_classes);
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) cm.add(truth[i], pred[i]);
  return cm;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.num_classes());
  for (int k = 0; k < cm.num_classes(); ++k) {
    const double tp = static_cast<double>(cm.at(k, k));
    auto& m = out[k];
    m.support = cm.row_sum(k);
    m.precision = ratio_or_zero(tp, static_cast<double>(cm.col_sum(k)));
    m.recall = ratio_or_zero(tp, static_cast<double>(m.support));
    m.f1 = ratio_or_zero(2.0 * m.precision * m.recall, m.precision + m.recall);
  }
  return out;
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  const auto metrics = per_class_metrics(confusion(pred, truth, num_classes));
  double sum = 0.0;
  for (const auto& m : metrics) sum += m.f1;
  return sum / static_cast<double>(num_classes);
}

EvalReport evaluate(std::span<const int> pred, std::span<const int> truth,
                    int num_classes) {
  EvalReport r;
  r.confusion = confusion(pred, truth, num_classes);
  r.per_class = per_class_metrics(r.confusion);
  r.n = pred.size();
  r.accuracy = r.n ? static_cast<double>(r.confusion.trace()) / static_cast<double>(r.n)
                   : 0.0;
  double sum = 0.0;
  for (const auto& m : r.per_class) sum += m.f1;
  r.macro_f1 = sum / static_cast<double>(num_classes);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& m : r.per_class) {
    per_class.push_back({{"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  nlohmann::json cm = nlohmann::json::array();
  for (int t = 0; t < r.confusion.num_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < r.confusion.num_classes(); ++p) row.push_back(r.confusion.at(t, p));
    cm.push_back(row);
  }
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"f1", r.macro_f1},
          {"f1_average", "macro"},
          {"per_class", per_class},
          {"confusion", cm}};
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

// --- Lambda sweep ------------------------------------------------------------

SweepReport lambda_sweep(const train::TrainConfig& base, std::span<const double> grid,
                         int replicates, const corpus::DatasetSplit& data,
                         const corpus::SoftLabelSet& soft_labels, int threads) {
  if (grid.empty()) throw UsageError("lambda grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw UsageError("lambda grid must be strictly increasing");
  }
  if (replicates < 1) throw UsageError("replicates must be at least 1");
  if (data.test.empty()) throw DataError("test split is empty");

  SweepReport report;
  report.grid.assign(grid.begin(), grid.end());
  for (int r = 0; r < replicates; ++r) report.seeds.push_back(base.seed + r);
  report.accuracies.assign(grid.size(), std::vector<double>(replicates, 0.0));
  report.macro_f1.assign(grid.size(), std::vector<double>(replicates, 0.0));

  const auto truth = distill::labels_of(data.test);
  const std::size_t cells = grid.size() * static_cast<std::size_t>(replicates);
  std::vector<std::exception_ptr> failures(cells);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t li = cell / replicates;
    const std::size_t ri = cell % replicates;
    train::TrainConfig cfg = base;
    cfg.lambda = grid[li];
    cfg.seed = report.seeds[ri];
    try {
      const auto trained = train::train_model(cfg, data, &soft_labels);
      const auto pred = predict(cfg.model, trained.params, data.test);
      const auto r = evaluate(pred, truth, cfg.model.num_classes);
      report.accuracies[li][ri] = r.accuracy;
      report.macro_f1[li][ri] = r.macro_f1;
    } catch (const Error& e) {
      const std::string where = "lambda=" + fmt("%g", grid[li], 0.0) +
                                " seed=" + std::to_string(cfg.seed) + ": ";
      failures[cell] = std::make_exception_ptr(Error(e.kind(), where + e.what()));
    } catch (...) {
      failures[cell] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells)));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::vector<std::thread> pool;
    std::mutex mu;
    std::size_t next = 0;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t cell;
          {
            std::lock_guard lock(mu);
            if (next >= cells) return;
            cell = next++;
          }
          run_cell(cell);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& accs : report.accuracies) {
    report.accuracy_stats.push_back(mean_sd(accs));
    lo = std::min(lo, report.accuracy_stats.back().mean);
    hi = std::max(hi, report.accuracy_stats.back().mean);
  }
  report.spread = hi - lo;
  return report;
}

nlohmann::json to_json(const SweepReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    rows.push_back({{"lambda", r.grid[i]},
                    {"accuracies", r.accuracies[i]},
                    {"macro_f1", r.macro_f1[i]},
                    {"mean", r.accuracy_stats[i].mean},
                    {"sd", r.accuracy_stats[i].sd}});
  }
  return {{"grid", r.grid}, {"seeds", r.seeds}, {"results", rows}, {"spread", r.spread}};
}

std::string render_sweep_table(const SweepReport& r) {
  std::string out = "lambda   accuracy (mean ± sd)   replicates\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    out += pad_right(fmt("%.2f", r.grid[i], 0.0), 9);
    out += pad_right(fmt("%.3f±%.3f", r.accuracy_stats[i].mean, r.accuracy_stats[i].sd), 23);
    for (double a : r.accuracies[i]) out += fmt("%.3f ", a, 0.0);
    out += '\n';
  }
  out += fmt("spread of means: %.4f\n", r.spread, 0.0);
  return out;
}

// --- Latency -----------------------------------------------------------------

LatencyReport latency_benchmark(const train::Checkpoint& student,
                                const train::Checkpoint& teacher,
                                std::span<const corpus::RawExample> batch, int warmup,
                                int iterations) {
  if (iterations < 30) throw UsageError("latency benchmark needs at least 30 iterations");
  if (warmup < 0) throw UsageError("warmup must be non-negative");
  if (batch.empty()) throw UsageError("latency benchmark needs a non-empty batch");
  const auto student_batch =
      corpus::encode_all(batch, student.vocab, student.model.max_len);
  const auto teacher_batch =
      corpus::encode_all(batch, teacher.vocab, teacher.model.max_len);

  using Clock = std::chrono::steady_clock;
  auto time_once = [](const train::Checkpoint& m,
                      const std::vector<corpus::EncodedExample>& b) {
    const auto t0 = Clock::now();
    const auto r = nn::forward(m.model, m.params, b, nn::Mode::kInfer);
    const auto t1 = Clock::now();
    if (r.probs.rows() == 0) throw Error(ErrorKind::kInternal, "empty forward result");
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };

  for (int i = 0; i < warmup; ++i) {
    time_once(student, student_batch);
    time_once(teacher, teacher_batch);
  }
  std::vector<double> s_times, t_times;
  for (int i = 0; i < iterations; ++i) {
    s_times.push_back(time_once(student, student_batch));
    t_times.push_back(time_once(teacher, teacher_batch));
  }
  auto summarize = [](std::vector<double> times, std::size_t params) {
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    ModelLatency m;
    m.median_ms = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    m.p95_ms = times[std::max<std::size_t>(rank, 1) - 1];
    m.params = params;
    return m;
  };
  LatencyReport report;
  report.student = summarize(std::move(s_times), nn::param_count(student.model));
  report.teacher = summarize(std::move(t_times), nn::param_count(teacher.model));
  report.batch_size = batch.size();
  report.warmup = warmup;
  report.iterations = iterations;
  report.speedup = report.teacher.median_ms / report.student.median_ms;
  return report;
}

nlohmann::json to_json(const LatencyReport& r) {
  auto model = [](const ModelLatency& m) {
    return nlohmann::json{
        {"median_ms", m.median_ms}, {"p95_ms", m.p95_ms}, {"params", m.params}};
  };
  return {{"student", model(r.student)}, {"teacher", model(r.teacher)},
          {"batch_size", r.batch_size},  {"warmup", r.warmup},
          {"iterations", r.iterations},  {"speedup", r.speedup}};
}

// --- Size --------------------------------------------------------------------

SizeEntry size_entry(const std::string& name, const train::Checkpoint& checkpoint) {
  return {name, nn::param_count(checkpoint.model),
          train::serialize_checkpoint(checkpoint).size()};
}

SizeReport size_report(std::vector<SizeEntry> entries) {
  SizeReport r;
  r.entries = std::move(entries);
  for (const auto& a : r.entries) {
    std::vector<double> row;
    for (const auto& b : r.entries) {
      row.push_back(static_cast<double>(a.params) / static_cast<double>(b.params));
    }
    r.param_ratio.push_back(std::move(row));
  }
  return r;
}

nlohmann::json to_json(const SizeReport& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& e : r.entries) {
    models.push_back({{"name", e.name}, {"params", e.params}, {"bytes", e.bytes}});
  }
  return {{"models", models}, {"param_ratio", r.param_ratio}};
}

std::string render_comparison_table(std::span<const std::string> models,
                                    std::span<const ComparisonRow> rows) {
  constexpr std::size_t kName = 18;
  constexpr std::size_t kCell = 16;
  std::string out;
  auto section = [&](const char* title, auto pick) {
    out += pad_right("", kName) + "| " + title + "\n";
    out += pad_right("", kName) + "| ";
    for (const auto& m : models) out += pad_right(m, kCell);
    out += "\n";
    for (const auto& row : rows) {
      out += pad_right(row.dataset, kName) + "| ";
      for (const auto& cell : pick(row)) out += pad_right(fmt("%.3f±%.3f", cell.mean, cell.sd), kCell);
      out += "\n";
    }
  };
  section("Accuracy", [](const ComparisonRow& r) { return r.accuracy; });
  section("F-1 Score", [](const ComparisonRow& r) { return r.f1; });
  return out;
}

}  // namespace kdistill::eval
