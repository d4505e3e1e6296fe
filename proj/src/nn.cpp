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

#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace kdistill::nn {

namespace {

std::span<double> span_of(auto& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> span_of(const auto& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_uniform(Rng& rng, std::span<double> values, double bound) {
  for (double& v : values) v = rng.uniform(-bound, bound);
}

double glorot_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

LstmParams lstm_zeros(int units, int input) {
  return {Matrix::Zero(4 * units, input), Matrix::Zero(4 * units, units),
          RowVector::Zero(4 * units)};
}

Matrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double rate) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < mask.size(); ++k) {
    mask.data()[k] = rng.uniform() < rate ? 0.0 : scale;
  }
  return mask;
}

// One LSTM direction over the batch. Step s of the forward direction reads
// position s; step s of the backward direction reads position len-1-s.
void run_direction(const LstmParams& p, const std::vector<Matrix>& inputs_by_pos,
                   const std::vector<int>& lengths, int steps, bool reverse,
                   DirectionCache& cache) {
  const Eigen::Index batch = static_cast<Eigen::Index>(lengths.size());
  const Eigen::Index units = p.recurrent_weights.cols();
  const Eigen::Index embed = p.input_weights.cols();
  Matrix h_prev = Matrix::Zero(batch, units);
  Matrix c_prev = Matrix::Zero(batch, units);
  cache.inputs.resize(steps);
  cache.gates.resize(steps);
  cache.cell.resize(steps);
  cache.cell_tanh.resize(steps);
  cache.hidden.resize(steps);
  for (int s = 0; s < steps; ++s) {
    Matrix x = Matrix::Zero(batch, embed);
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (s >= lengths[i]) continue;
      const int pos = reverse ? lengths[i] - 1 - s : s;
      x.row(i) = inputs_by_pos[pos].row(i);
    }
    Matrix z(batch, 4 * units);
    z.noalias() = x * p.input_weights.transpose();
    z.noalias() += h_prev * p.recurrent_weights.transpose();
    z.rowwise() += p.bias;

    Matrix c(batch, units);
    Matrix tc(batch, units);
    Matrix h(batch, units);
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (s >= lengths[i]) {
        z.row(i).setZero();
        c.row(i) = c_prev.row(i);
        tc.row(i) = c_prev.row(i).array().tanh();
        h.row(i) = h_prev.row(i);
        continue;
      }
      for (Eigen::Index j = 0; j < units; ++j) {
        const double ig = sigmoid(z(i, j));
        const double fg = sigmoid(z(i, units + j));
        const double gg = std::tanh(z(i, 2 * units + j));
        const double og = sigmoid(z(i, 3 * units + j));
        z(i, j) = ig;
        z(i, units + j) = fg;
        z(i, 2 * units + j) = gg;
        z(i, 3 * units + j) = og;
        const double cv = fg * c_prev(i, j) + ig * gg;
        const double tcv = std::tanh(cv);
        c(i, j) = cv;
        tc(i, j) = tcv;
        h(i, j) = og * tcv;
      }
    }
    cache.inputs[s] = std::move(x);
    cache.gates[s] = std::move(z);
    h_prev = h;
    c_prev = c;
    cache.cell[s] = std::move(c);
    cache.cell_tanh[s] = std::move(tc);
    cache.hidden[s] = std::move(h);
  }
}

// Backpropagation through time for one direction. `grad_hidden[s]` holds the
// pooling gradient arriving at step s. Input gradients are added to
// `grad_inputs_by_pos`.
void backprop_direction(const LstmParams& p, const DirectionCache& cache,
                        const std::vector<int>& lengths, int steps, bool reverse,
                        const std::vector<Matrix>& grad_hidden,
                        std::vector<Matrix>& grad_inputs_by_pos, LstmParams& g) {
  const Eigen::Index batch = static_cast<Eigen::Index>(lengths.size());
  const Eigen::Index units = p.recurrent_weights.cols();
  Matrix dh_next = Matrix::Zero(batch, units);
  Matrix dc_next = Matrix::Zero(batch, units);
  Matrix dz(batch, 4 * units);
  for (int s = steps - 1; s >= 0; --s) {
    const Matrix& gates = cache.gates[s];
    const Matrix& tc = cache.cell_tanh[s];
    Matrix dh = grad_hidden[s] + dh_next;
    Matrix dc_prev(batch, units);
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (s >= lengths[i]) {
        dz.row(i).setZero();
        dc_prev.row(i) = dc_next.row(i);
        continue;
      }
      for (Eigen::Index j = 0; j < units; ++j) {
        const double ig = gates(i, j);
        const double fg = gates(i, units + j);
        const double gg = gates(i, 2 * units + j);
        const double og = gates(i, 3 * units + j);
        const double cp = s > 0 ? cache.cell[s - 1](i, j) : 0.0;
        const double dhv = dh(i, j);
        const double dcv = dc_next(i, j) + dhv * og * (1.0 - tc(i, j) * tc(i, j));
        dz(i, j) = dcv * gg * ig * (1.0 - ig);
        dz(i, units + j) = dcv * cp * fg * (1.0 - fg);
        dz(i, 2 * units + j) = dcv * ig * (1.0 - gg * gg);
        dz(i, 3 * units + j) = dhv * tc(i, j) * og * (1.0 - og);
        dc_prev(i, j) = dcv * fg;
      }
    }
    g.input_weights.noalias() += dz.transpose() * cache.inputs[s];
    if (s > 0) g.recurrent_weights.noalias() += dz.transpose() * cache.hidden[s - 1];
    g.bias += dz.colwise().sum();

    const Matrix dx = dz * p.input_weights;
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (s >= lengths[i]) continue;
      const int pos = reverse ? lengths[i] - 1 - s : s;
      grad_inputs_by_pos[pos].row(i) += dx.row(i);
    }
    Matrix dh_prev = dz * p.recurrent_weights;
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (s >= lengths[i]) dh_prev.row(i) = dh.row(i);
    }
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
}

}  // namespace

// --- ModelConfig -------------------------------------------------------------

void ModelConfig::validate() const {
  if (vocab_size < 2 || embed_dim < 1 || lstm_units < 1 || dense_units < 1 ||
      num_classes < 1 || max_len < 1) {
    throw UsageError("model dimensions must be positive (vocab_size >= 2)");
  }
  auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!rate_ok(dropout_embed) || !rate_ok(dropout_dense)) {
    throw UsageError("dropout rates must lie in [0, 1)");
  }
}

ModelConfig ModelConfig::student(int num_classes) {
  ModelConfig c;
  c.num_classes = num_classes;
  return c;
}

ModelConfig ModelConfig::teacher(int num_classes) {
  ModelConfig c;
  c.vocab_size = 4096;
  c.embed_dim = 128;
  c.lstm_units = 128;
  c.dense_units = 64;
  c.num_classes = num_classes;
  return c;
}

std::size_t param_count(const ModelConfig& c) {
  const std::size_t v = c.vocab_size, e = c.embed_dim, h = c.lstm_units,
                    d = c.dense_units, k = c.num_classes;
  return v * e + 2 * (4 * ((e + h) * h + h)) + (2 * h * d + d) + (d * k + k);
}

// --- ParamSet ----------------------------------------------------------------

ParamSet ParamSet::zeros(const ModelConfig& c) {
  c.validate();
  ParamSet p;
  p.embedding = Matrix::Zero(c.vocab_size, c.embed_dim);
  p.forward = lstm_zeros(c.lstm_units, c.embed_dim);
  p.backward = lstm_zeros(c.lstm_units, c.embed_dim);
  p.dense_weights = Matrix::Zero(2 * c.lstm_units, c.dense_units);
  p.dense_bias = RowVector::Zero(c.dense_units);
  p.output_weights = Matrix::Zero(c.dense_units, c.num_classes);
  p.output_bias = RowVector::Zero(c.num_classes);
  return p;
}

std::vector<ParamBlock> ParamSet::blocks() {
  auto blk = [](std::string name, auto& m) {
    return ParamBlock{std::move(name), span_of(m), m.rows(), m.cols()};
  };
  return {blk("embedding", embedding),
          blk("lstm_fwd.input_weights", forward.input_weights),
          blk("lstm_fwd.recurrent_weights", forward.recurrent_weights),
          blk("lstm_fwd.bias", forward.bias),
          blk("lstm_bwd.input_weights", backward.input_weights),
          blk("lstm_bwd.recurrent_weights", backward.recurrent_weights),
          blk("lstm_bwd.bias", backward.bias),
          blk("dense.weights", dense_weights),
          blk("dense.bias", dense_bias),
          blk("output.weights", output_weights),
          blk("output.bias", output_bias)};
}

std::vector<ConstParamBlock> ParamSet::blocks() const {
  std::vector<ConstParamBlock> out;
  for (auto& b : const_cast<ParamSet*>(this)->blocks()) {
    out.push_back({b.name, b.values, b.rows, b.cols});
  }
  return out;
}

std::size_t ParamSet::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

bool ParamSet::same_shape(const ParamSet& other) const {
  const auto a = blocks();
  const auto b = other.blocks();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows != b[i].rows || a[i].cols != b[i].cols) return false;
  }
  return true;
}

void ParamSet::set_zero() {
  for (auto& b : blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
}

ParamSet init_params(const ModelConfig& c, std::uint64_t seed) {
  ParamSet p = ParamSet::zeros(c);
  Rng rng(derive_seed(seed, 0x1417u));
  fill_uniform(rng, span_of(p.embedding), 0.05);
  for (LstmParams* lstm : {&p.forward, &p.backward}) {
    fill_uniform(rng, span_of(lstm->input_weights),
                 glorot_bound(c.embed_dim, 4 * c.lstm_units));
    fill_uniform(rng, span_of(lstm->recurrent_weights),
                 glorot_bound(c.lstm_units, 4 * c.lstm_units));
    lstm->bias.segment(c.lstm_units, c.lstm_units).setOnes();
  }
  fill_uniform(rng, span_of(p.dense_weights),
               glorot_bound(2 * c.lstm_units, c.dense_units));
  fill_uniform(rng, span_of(p.output_weights),
               glorot_bound(c.dense_units, c.num_classes));
  return p;
}

// --- Forward / backward ------------------------------------------------------

Matrix softmax_stable(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out(i, k) = std::exp(logits(i, k) - m);
      sum += out(i, k);
    }
    out.row(i) /= sum;
  }
  return out;
}

ForwardResult forward(const ModelConfig& config, const ParamSet& params,
                      std::span<const corpus::EncodedExample> batch, Mode mode,
                      Rng* rng) {
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index units = config.lstm_units;
  if (b == 0) throw UsageError("forward called with an empty batch");
  if (params.embedding.rows() != config.vocab_size ||
      params.embedding.cols() != config.embed_dim ||
      params.output_bias.size() != config.num_classes) {
    throw UsageError("parameter shapes do not match the model configuration");
  }
  const bool train = mode == Mode::kTrain;
  if (train && !rng && (config.dropout_embed > 0.0 || config.dropout_dense > 0.0)) {
    throw UsageError("train-mode forward with dropout needs an rng");
  }

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.mode = mode;
  cache.batch = static_cast<int>(b);
  cache.lengths.resize(b);
  int steps = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& ex = batch[i];
    if (ex.true_len <= 0 || ex.true_len > static_cast<int>(ex.token_ids.size())) {
      throw DataError("example '" + ex.id + "' has invalid true_len " +
                      std::to_string(ex.true_len));
    }
    for (int t = 0; t < ex.true_len; ++t) {
      if (ex.token_ids[t] < 0 || ex.token_ids[t] >= config.vocab_size) {
        throw DataError("example '" + ex.id + "' has token id " +
                        std::to_string(ex.token_ids[t]) + " outside vocabulary of size " +
                        std::to_string(config.vocab_size));
      }
    }
    cache.lengths[i] = ex.true_len;
    steps = std::max(steps, ex.true_len);
  }
  cache.steps = steps;
  cache.tokens = IndexMatrix::Zero(b, steps);

  // Embedding lookup, optionally with inverted dropout, indexed by position.
  const bool embed_dropout = train && config.dropout_embed > 0.0;
  std::vector<Matrix> x_pos(steps, Matrix::Zero(b, config.embed_dim));
  if (embed_dropout) cache.embed_mask.resize(steps);
  for (int t = 0; t < steps; ++t) {
    for (Eigen::Index i = 0; i < b; ++i) {
      if (t >= cache.lengths[i]) continue;
      const int tok = batch[i].token_ids[t];
      cache.tokens(i, t) = tok;
      x_pos[t].row(i) = params.embedding.row(tok);
    }
    if (embed_dropout) {
      cache.embed_mask[t] = dropout_mask(*rng, b, config.embed_dim, config.dropout_embed);
      x_pos[t].array() *= cache.embed_mask[t].array();
    }
  }

  run_direction(params.forward, x_pos, cache.lengths, steps, false, cache.fwd);
  run_direction(params.backward, x_pos, cache.lengths, steps, true, cache.bwd);

  // Global max pool over true positions; ties go to the earliest position
  // in sequence order for both directions.
  cache.pooled.resize(b, 2 * units);
  cache.pool_step.resize(b, 2 * units);
  for (Eigen::Index i = 0; i < b; ++i) {
    const int len = cache.lengths[i];
    for (Eigen::Index j = 0; j < units; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int best_step = 0;
      for (int pos = 0; pos < len; ++pos) {
        const double v = cache.fwd.hidden[pos](i, j);
        if (v > best) {
          best = v;
          best_step = pos;
        }
      }
      cache.pooled(i, j) = best;
      cache.pool_step(i, j) = best_step;

      best = -std::numeric_limits<double>::infinity();
      best_step = 0;
      for (int s = 0; s < len; ++s) {
        const double v = cache.bwd.hidden[s](i, j);
        if (v > best) {
          best = v;
          best_step = s;
        }
      }
      cache.pooled(i, units + j) = best;
      cache.pool_step(i, units + j) = best_step;
    }
  }

  cache.dense_pre.noalias() = cache.pooled * params.dense_weights;
  cache.dense_pre.rowwise() += params.dense_bias;
  cache.dense_out = cache.dense_pre.cwiseMax(0.0);
  if (train && config.dropout_dense > 0.0) {
    cache.dense_mask = dropout_mask(*rng, b, config.dense_units, config.dropout_dense);
    cache.dense_out.array() *= cache.dense_mask.array();
  }
  cache.logits.noalias() = cache.dense_out * params.output_weights;
  cache.logits.rowwise() += params.output_bias;
  result.probs = softmax_stable(cache.logits);
  return result;
}

GradSet backward(const ModelConfig& config, const ParamSet& params,
                 const ForwardCache& cache, const Matrix& grad_logits) {
  const Eigen::Index b = cache.batch;
  const Eigen::Index units = config.lstm_units;
  if (grad_logits.rows() != b || grad_logits.cols() != config.num_classes ||
      cache.pooled.rows() != b || cache.pooled.cols() != 2 * units) {
    throw UsageError("backward: gradient shape does not match the forward cache");
  }
  GradSet g = ParamSet::zeros(config);

  g.output_weights.noalias() = cache.dense_out.transpose() * grad_logits;
  g.output_bias = grad_logits.colwise().sum();
  Matrix d_dense = grad_logits * params.output_weights.transpose();
  if (cache.dense_mask.size() > 0) d_dense.array() *= cache.dense_mask.array();
  d_dense.array() *= (cache.dense_pre.array() > 0.0).cast<double>();
  g.dense_weights.noalias() = cache.pooled.transpose() * d_dense;
  g.dense_bias = d_dense.colwise().sum();
  const Matrix d_pooled = d_dense * params.dense_weights.transpose();

  std::vector<Matrix> dh_fwd(cache.steps, Matrix::Zero(b, units));
  std::vector<Matrix> dh_bwd(cache.steps, Matrix::Zero(b, units));
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < units; ++j) {
      dh_fwd[cache.pool_step(i, j)](i, j) += d_pooled(i, j);
      dh_bwd[cache.pool_step(i, units + j)](i, j) += d_pooled(i, units + j);
    }
  }

  std::vector<Matrix> dx_pos(cache.steps, Matrix::Zero(b, config.embed_dim));
  backprop_direction(params.forward, cache.fwd, cache.lengths, cache.steps, false,
                     dh_fwd, dx_pos, g.forward);
  backprop_direction(params.backward, cache.bwd, cache.lengths, cache.steps, true,
                     dh_bwd, dx_pos, g.backward);

  for (int t = 0; t < cache.steps; ++t) {
    if (!cache.embed_mask.empty()) dx_pos[t].array() *= cache.embed_mask[t].array();
    for (Eigen::Index i = 0; i < b; ++i) {
      if (t >= cache.lengths[i]) continue;
      g.embedding.row(cache.tokens(i, t)) += dx_pos[t].row(i);
    }
  }
  return g;
}

// --- Gradient check ----------------------------------------------------------

GradCheckResult gradient_check(const ModelConfig& config, const ParamSet& params,
                               std::span<const corpus::EncodedExample> batch,
                               const LossFunction& loss, double epsilon) {
  ModelConfig cfg = config;
  cfg.dropout_embed = 0.0;
  cfg.dropout_dense = 0.0;

  auto eval_loss = [&](const ParamSet& p) {
    const double v = loss.value(forward(cfg, p, batch, Mode::kInfer).probs);
    if (!std::isfinite(v)) throw TrainingError("gradient check: non-finite loss");
    return v;
  };

  const ForwardResult base = forward(cfg, params, batch, Mode::kInfer);
  const GradSet analytic = backward(cfg, params, base.cache, loss.grad_logits(base.probs));

  GradCheckResult result;
  ParamSet probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = analytic.blocks();
  for (std::size_t bi = 0; bi < probe_blocks.size(); ++bi) {
    auto values = probe_blocks[bi].values;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + epsilon;
      const double up = eval_loss(probe);
      values[k] = saved - epsilon;
      const double down = eval_loss(probe);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grad_blocks[bi].values[k];
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_block = probe_blocks[bi].name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

GradCheckResult gradient_check(const ModelConfig& config,
                               std::span<const corpus::EncodedExample> batch,
                               const LossFunction& loss, double epsilon,
                               std::uint64_t seed) {
  // Every block drawn from U(-1, 1). At the init scale hidden states are
  // ~1e-3 and some gradients fall near 1e-9, where central differences at
  // eps=1e-5 are dominated by double roundoff rather than the derivative.
  ParamSet params = ParamSet::zeros(config);
  Rng rng(derive_seed(seed, 0x6c4eu));
  for (auto& block : params.blocks()) fill_uniform(rng, block.values, 1.0);
  return gradient_check(config, params, batch, loss, epsilon);
}

}  // namespace kdistill::nn

namespace kdistill::nn {

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows(), 0);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(i, k) > probs(i, best)) best = static_cast<int>(k);
    }
    out[i] = best;
  }
  return out;
}

Matrix predict_proba(const ModelConfig& config, const ParamSet& params,
                     std::span<const corpus::EncodedExample> examples,
                     std::size_t chunk) {
  Matrix out(static_cast<Eigen::Index>(examples.size()), config.num_classes);
  for (std::size_t start = 0; start < examples.size(); start += chunk) {
    const auto part = examples.subspan(start, std::min(chunk, examples.size() - start));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(part.size())) =
        forward(config, params, part, Mode::kInfer).probs;
  }
  return out;
}

}  // namespace kdistill::nn
