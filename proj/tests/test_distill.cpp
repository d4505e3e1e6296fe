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
#include "rng.hpp"

using namespace kdistill;
using namespace kdistill::distill;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) m(0, k++) = x;
  return m;
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

TEST_CASE("scalar oracles") {
  const Matrix q = row({0.7, 0.3});
  const Matrix p = row({0.6, 0.4});
  const std::vector<int> y{0};
  CHECK(hard_ce(q, y) == doctest::Approx(0.356675).epsilon(1e-6));
  CHECK(soft_ce(q, p) == doctest::Approx(0.695594).epsilon(1e-6));
  CHECK(kd_loss(q, y, p, 0.5).combined == doctest::Approx(0.704472).epsilon(1e-6));
  CHECK(hard_ce(q, y) == -std::log(0.7));
}

TEST_CASE("uniform predictions give ln K") {
  Matrix q = Matrix::Constant(3, 4, 0.25);
  const std::vector<int> y{0, 3, 2};
  CHECK(hard_ce(q, y) == doctest::Approx(std::log(4.0)));
  Rng rng(1);
  CHECK(soft_ce(q, random_simplex(3, 4, rng)) == doctest::Approx(std::log(4.0)));
  CHECK(hard_ce(row({0.0, 1.0}), std::vector<int>{1}) == 0.0);
}

TEST_CASE("lambda zero reduces to hard cross entropy bit for bit") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix q = random_simplex(8, 5, rng);
    const Matrix p = random_simplex(8, 5, rng);
    std::vector<int> y(8);
    for (auto& v : y) v = static_cast<int>(rng.below(5));
    CHECK(kd_loss(q, y, p, 0.0).combined == hard_ce(q, y));
    const Matrix onehot = [&] {
      Matrix m = Matrix::Zero(8, 5);
      for (int i = 0; i < 8; ++i) m(i, y[i]) = 1.0;
      return m;
    }();
    CHECK(std::abs(soft_ce(q, onehot) - hard_ce(q, y)) <= 1e-12);
    CHECK(kd_loss(q, y, onehot, 0.3).combined == doctest::Approx(1.3 * hard_ce(q, y)));
  }
}

TEST_CASE("combined loss is affine in lambda") {
  Rng rng(4);
  const Matrix q = random_simplex(6, 3, rng);
  const Matrix p = random_simplex(6, 3, rng);
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  const double a = kd_loss(q, y, p, 0.1).combined;
  const double b = kd_loss(q, y, p, 0.3).combined;
  const double ab = kd_loss(q, y, p, 0.4).combined;
  CHECK(a + b == doctest::Approx(ab + hard_ce(q, y)).epsilon(1e-14));
  const auto parts = kd_loss(q, y, p, 0.7);
  CHECK(parts.combined == parts.hard + 0.7 * parts.soft);
  CHECK(parts.soft >= 0.0);
}

TEST_CASE("Gibbs inequality on random simplex draws") {
  Rng rng(5);
  int strict = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const Matrix q = random_simplex(1, k, rng);
    const Matrix p = random_simplex(1, k, rng);
    CHECK(soft_ce(q, p) >= entropy(p) - 1e-15);
    strict += soft_ce(q, p) > entropy(p);
    CHECK(soft_ce(p, p) == doctest::Approx(entropy(p)).epsilon(1e-14));
  }
  CHECK(strict == 1000);
}

TEST_CASE("logit gradient matches finite differences through softmax") {
  // h = 1e-4 keeps truncation near 1e-8 and roundoff near 1e-12.
  constexpr double h = 1e-4;
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 1 + static_cast<int>(rng.below(4));
    const int k = 2 + static_cast<int>(rng.below(4));
    Matrix z(b, k);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-3, 3);
    const Matrix p = random_simplex(b, k, rng);
    std::vector<int> y(b);
    for (auto& v : y) v = static_cast<int>(rng.below(k));
    const double lambda = rng.uniform(0, 1);
    const Matrix g = kd_loss_grad_logits(nn::softmax_stable(z), y, p, lambda);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Matrix up = z, down = z;
      up.data()[i] += h;
      down.data()[i] -= h;
      const double n = (kd_loss(nn::softmax_stable(up), y, p, lambda).combined -
                        kd_loss(nn::softmax_stable(down), y, p, lambda).combined) /
                       (2.0 * h);
      const double a = g.data()[i];
      worst = std::max(worst, std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gradient vanishes at the optimum") {
  const Matrix q = row({0.0, 1.0, 0.0});
  const std::vector<int> y{1};
  CHECK(kd_loss_grad_logits(q, y, q, 0.7).isZero());
  CHECK(hard_loss_grad_logits(q, y).isZero());
}

TEST_CASE("temperature other than one is rejected") {
  const Matrix q = row({0.5, 0.5});
  const std::vector<int> y{0};
  CHECK_THROWS_AS(kd_loss(q, y, q, 0.2, 2.0), UsageError);
  CHECK_NOTHROW(kd_loss(q, y, q, 0.2, 1.0));
}

TEST_CASE("label and shape errors") {
  const Matrix q = row({0.5, 0.5});
  CHECK_THROWS(hard_ce(q, std::vector<int>{2}));
  CHECK_THROWS(soft_ce(q, row({0.2, 0.3, 0.5})));
  CHECK_THROWS(kd_loss(q, std::vector<int>{0}, row({0.6, 0.6}), 0.2));
}

TEST_CASE("teachers produce valid soft labels") {
  const std::vector<corpus::RawExample> ex{{"a", "x y", 0}, {"b", "y", 1}, {"c", "z x", 2}};
  const auto vocab = corpus::Vocabulary::build(ex, 16, 1);
  nn::ModelConfig cfg;
  cfg.vocab_size = 16;
  cfg.embed_dim = 3;
  cfg.lstm_units = 2;
  cfg.dense_units = 2;
  cfg.num_classes = 3;
  cfg.max_len = 4;

  SUBCASE("all-zero teacher is uniform") {
    const auto soft = generate_soft_labels(
        TeacherSource{BuiltinTeacher{cfg, nn::ParamSet::zeros(cfg), vocab}}, ex, 3);
    CHECK(soft.size() == 3);
    for (const auto& [id, probs] : soft.entries()) {
      for (double v : probs) CHECK(v == doctest::Approx(1.0 / 3));
    }
  }
  SUBCASE("trained-shape teacher rows sum to one") {
    const auto soft = generate_soft_labels(
        TeacherSource{BuiltinTeacher{cfg, nn::init_params(cfg, 2), vocab}}, ex, 3);
    for (const auto& [id, probs] : soft.entries()) {
      double s = 0;
      for (double v : probs) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
  SUBCASE("file-backed teacher is restricted to dataset ids") {
    corpus::SoftLabelSet file(3);
    file.insert("a", {1, 0, 0});
    file.insert("b", {0, 1, 0});
    file.insert("c", {0, 0, 1});
    file.insert("extra", {0.5, 0.5, 0});
    const auto soft = generate_soft_labels(TeacherSource{FileBackedTeacher{file}}, ex, 3);
    CHECK(soft.size() == 3);
    CHECK(soft.at("b") == file.at("b"));
    const std::vector<corpus::RawExample> more{{"q", "x", 0}};
    CHECK_THROWS_AS(generate_soft_labels(TeacherSource{FileBackedTeacher{file}}, more, 3),
                    DataError);
  }
  SUBCASE("encoded inputs must use the teacher vocabulary") {
    const auto encoded = corpus::encode_all(ex, vocab, 4);
    const BuiltinTeacher t{cfg, nn::init_params(cfg, 2), vocab};
    CHECK(generate_soft_labels(t, encoded, vocab).size() == 3);
    const auto other = corpus::Vocabulary::from_tokens({"q"});
    CHECK_THROWS_AS(generate_soft_labels(t, encoded, other), DataError);
  }
}
