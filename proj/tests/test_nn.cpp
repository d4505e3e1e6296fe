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

#include "doctest.h"

#include <cmath>

#include "distill.hpp"
#include "error.hpp"
#include "nn.hpp"
#include "rng.hpp"

using namespace kdistill;
using namespace kdistill::nn;
using corpus::EncodedExample;

namespace {

ModelConfig toy(int k = 3) {
  ModelConfig c;
  c.vocab_size = 12;
  c.embed_dim = 4;
  c.lstm_units = 3;
  c.dense_units = 4;
  c.num_classes = k;
  c.max_len = 6;
  return c;
}

std::vector<EncodedExample> random_batch(const ModelConfig& c, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EncodedExample> out;
  for (int i = 0; i < n; ++i) {
    EncodedExample e;
    e.id = "b" + std::to_string(i);
    e.true_len = 1 + static_cast<int>(rng.below(c.max_len));
    e.token_ids.assign(c.max_len, 0);
    for (int t = 0; t < e.true_len; ++t) {
      e.token_ids[t] = 1 + static_cast<int>(rng.below(c.vocab_size - 1));
    }
    e.label = static_cast<int>(rng.below(c.num_classes));
    out.push_back(e);
  }
  return out;
}

Matrix random_simplex(int rows, int k, Rng& rng) {
  Matrix p(rows, k);
  for (int i = 0; i < rows; ++i) {
    double s = 0;
    for (int j = 0; j < k; ++j) s += (p(i, j) = -std::log(1.0 - rng.uniform()));
    p.row(i) /= s;
  }
  return p;
}

}  // namespace

TEST_CASE("parameter count closed form") {
  CHECK(param_count(ModelConfig::student(5)) == 23269);
  CHECK(init_params(ModelConfig::student(5), 0).size() == 23269);
  const auto t = ModelConfig::teacher(5);
  CHECK(param_count(t) == init_params(t, 0).size());
  CHECK(static_cast<double>(param_count(t)) / 23269.0 >= 20.0);
  const auto c = toy();
  // V*E + 2*4*((E+H)*H + H) + 2H*D + D + D*K + K
  ModelConfig unit{1, 1, 1, 1, 1};
  CHECK(param_count(unit) == 30);
  auto doubled = ModelConfig::student(5);
  doubled.vocab_size *= 2;
  CHECK(param_count(doubled) == 23269 + 512 * 32);
  CHECK(param_count(c) == 12 * 4 + 2 * 4 * ((4 + 3) * 3 + 3) + 6 * 4 + 4 + 4 * 3 + 3);
}

TEST_CASE("initialization: forget bias 1, other biases 0, bounded weights") {
  const auto c = toy();
  const auto p = init_params(c, 7);
  const int h = c.lstm_units;
  for (int j = 0; j < 4 * h; ++j) {
    const double expect = (j >= h && j < 2 * h) ? 1.0 : 0.0;
    CHECK(p.forward.bias(j) == expect);
    CHECK(p.backward.bias(j) == expect);
  }
  CHECK(p.dense_bias.isZero());
  CHECK(p.output_bias.isZero());
  CHECK(p.embedding.cwiseAbs().maxCoeff() <= 0.05);
  const double limit = std::sqrt(6.0 / (c.embed_dim + 4 * h));
  CHECK(p.forward.input_weights.cwiseAbs().maxCoeff() <= limit);
  const auto q = init_params(c, 7);
  CHECK(p.embedding == q.embedding);
  CHECK_FALSE(init_params(c, 8).embedding == p.embedding);
}

TEST_CASE("softmax is stable and normalized") {
  Matrix z(3, 3);
  z << 1000, 1001, 1002, -1000, -1000, -1000, 0, 0, 50;
  const Matrix p = softmax_stable(z);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);
  CHECK(p(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(p.allFinite());
}

TEST_CASE("forward rows sum to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = toy(2 + static_cast<int>(seed % 4));
    const auto params = init_params(c, seed);
    const auto batch = random_batch(c, 5, seed + 100);
    const Matrix p = forward(c, params, batch, Mode::kInfer).probs;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-12);
      CHECK(p.row(i).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("padding is neutral") {
  const auto c = toy();
  const auto params = init_params(c, 3);
  auto batch = random_batch(c, 4, 9);
  const Matrix base = forward(c, params, batch, Mode::kInfer).probs;

  // garbage past true_len, longer padding and batch composition do not matter
  auto noisy = batch;
  for (auto& e : noisy) {
    for (int t = e.true_len; t < c.max_len; ++t) e.token_ids[t] = 5;
    e.token_ids.resize(c.max_len + 10, 7);
  }
  const Matrix again = forward(c, params, noisy, Mode::kInfer).probs;
  CHECK((base - again).cwiseAbs().maxCoeff() == 0.0);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::vector<EncodedExample> one{batch[i]};
    const Matrix solo = forward(c, params, one, Mode::kInfer).probs;
    CHECK((solo.row(0) - base.row(i)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("max pool ties resolve to the earliest timestep") {
  auto c = toy();
  // All-zero parameters give h_t = 0 at every step: a full tie.
  const ParamSet p = ParamSet::zeros(c);
  EncodedExample e{"t", {2, 2, 2, 0, 0, 0}, 3, 0};
  const std::vector<EncodedExample> batch{e};
  const auto r = forward(c, p, batch, Mode::kInfer);
  for (int j = 0; j < c.lstm_units; ++j) {
    CHECK(r.cache.pool_step(0, j) == 0);
    CHECK(r.cache.pool_step(0, c.lstm_units + j) == 0);
  }
}

TEST_CASE("inputs outside the vocabulary are rejected") {
  const auto c = toy();
  EncodedExample e{"bad", {99, 0, 0, 0, 0, 0}, 1, 0};
  const std::vector<EncodedExample> batch{e};
  CHECK_THROWS_AS(forward(c, init_params(c, 0), batch, Mode::kInfer), DataError);
  EncodedExample z{"zero", {2, 0, 0, 0, 0, 0}, 0, 0};
  const std::vector<EncodedExample> zb{z};
  CHECK_THROWS_AS(forward(c, init_params(c, 0), zb, Mode::kInfer), DataError);
}

TEST_CASE("dropout is inactive in inference and seeded in training") {
  const auto c = toy();
  const auto params = init_params(c, 1);
  const auto batch = random_batch(c, 4, 2);
  Rng r1(5), r2(5);
  const Matrix a = forward(c, params, batch, Mode::kTrain, &r1).probs;
  const Matrix b = forward(c, params, batch, Mode::kTrain, &r2).probs;
  CHECK(a == b);
  const Matrix inf = forward(c, params, batch, Mode::kInfer).probs;
  CHECK_FALSE(a == inf);
  CHECK_THROWS_AS(forward(c, params, batch, Mode::kTrain, nullptr), UsageError);
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto c = toy();
    const auto batch = random_batch(c, 4, seed + 40);
    const auto labels = distill::labels_of(batch);
    SUBCASE("hard cross entropy") {
      const auto r = gradient_check(c, batch, distill::hard_ce_objective(labels),
                                    kGradCheckEpsilon, seed);
      INFO(r.worst_block, "[", r.worst_index, "]");
      CHECK(r.max_relative_error < 1e-4);
      CHECK(r.checked == param_count(c));
    }
    SUBCASE("kd objective") {
      Rng rng(seed);
      const Matrix teacher = random_simplex(4, c.num_classes, rng);
      for (const double lambda : {0.0, 0.2, 0.5}) {
        const auto r = gradient_check(c, batch, distill::kd_objective(labels, teacher, lambda),
                                      kGradCheckEpsilon, seed);
        INFO("lambda ", lambda, " ", r.worst_block, "[", r.worst_index, "]");
        CHECK(r.max_relative_error < 1e-4);
      }
    }
  }
}

TEST_CASE("backward with dropout replays the forward masks") {
  // With a fixed mask the network is a deterministic function; compare the
  // analytic gradient for one embedding entry with a masked finite difference.
  auto c = toy();
  c.dropout_embed = 0.3;
  c.dropout_dense = 0.3;
  const auto params = init_params(c, 11);
  const auto batch = random_batch(c, 3, 12);
  const auto labels = distill::labels_of(batch);
  auto loss_at = [&](const ParamSet& p) {
    Rng rng(77);
    return distill::hard_ce(forward(c, p, batch, Mode::kTrain, &rng).probs, labels);
  };
  Rng rng(77);
  const auto fr = forward(c, params, batch, Mode::kTrain, &rng);
  const auto g = backward(c, params, fr.cache, distill::hard_loss_grad_logits(fr.probs, labels));
  const int tok = batch[0].token_ids[0];
  for (int j = 0; j < c.embed_dim; ++j) {
    ParamSet up = params, down = params;
    up.embedding(tok, j) += 1e-5;
    down.embedding(tok, j) -= 1e-5;
    const double numeric = (loss_at(up) - loss_at(down)) / 2e-5;
    CHECK(g.embedding(tok, j) == doctest::Approx(numeric).epsilon(1e-5));
  }
}

TEST_CASE("argmax ties pick the smallest index") {
  Matrix p(2, 3);
  p << 0.4, 0.4, 0.2, 0.1, 0.2, 0.7;
  CHECK(argmax_rows(p) == std::vector<int>{0, 2});
}
