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
#include <cstdlib>
#include <filesystem>
#include <string>

#include "kdistill/kdistill.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("kdistill_capi_" + name);
  fs::remove_all(p);
  return p;
}

std::string take(char* s) {
  std::string out = s;
  kd_string_free(s);
  return out;
}

kd_prepared* small_prepared(int k, int n, std::uint64_t seed) {
  kd_synth_options so;
  kd_synth_options_default(&so);
  so.num_classes = k;
  so.n_per_class = n;
  so.seed = seed;
  kd_corpus* c = nullptr;
  REQUIRE(kd_corpus_synthesize(&so, &c) == KD_OK);
  kd_prepare_options po;
  kd_prepare_options_default(&po);
  po.max_len = 32;
  po.seed = seed;
  kd_prepared* p = nullptr;
  REQUIRE(kd_prepare(c, &po, &p) == KD_OK);
  kd_corpus_free(c);
  return p;
}

}  // namespace

TEST_CASE("version and parameter count") {
  CHECK(std::string(kd_version()) == "0.1.0");
  CHECK(kd_param_count(512, 32, 16, 16, 5) == 23269);
}

TEST_CASE("errors map to status codes and messages") {
  kd_corpus* c = nullptr;
  CHECK(kd_corpus_load("/nonexistent/file.csv", KD_FORMAT_AUTO, 0, &c) == KD_ERR_DATA);
  CHECK(c == nullptr);
  CHECK(std::string(kd_last_error()).find("nonexistent") != std::string::npos);
  CHECK(kd_corpus_load(nullptr, KD_FORMAT_AUTO, 0, &c) == KD_ERR_USAGE);
  kd_synth_options so;
  kd_synth_options_default(&so);
  so.noise_rate = 0.7;
  CHECK(kd_corpus_synthesize(&so, &c) == KD_ERR_USAGE);
  CHECK(kd_corpus_size(nullptr) == 0);
  kd_corpus_free(nullptr);
}

TEST_CASE("prepare, save and reload") {
  kd_prepared* p = small_prepared(3, 20, 1);
  CHECK(kd_prepared_num_classes(p) == 3);
  CHECK(kd_prepared_count(p, KD_SPLIT_ALL) == 60);
  CHECK(kd_prepared_count(p, KD_SPLIT_TRAIN) == 42);
  const auto dir = scratch("prep");
  REQUIRE(kd_prepared_save(p, dir.c_str()) == KD_OK);
  for (const char* f :
       {"train.jsonl", "validation.jsonl", "test.jsonl", "vocab.txt", "prepare.json"}) {
    CHECK(fs::exists(dir / f));
  }
  kd_prepared* q = nullptr;
  REQUIRE(kd_prepared_load(dir.c_str(), &q) == KD_OK);
  CHECK(kd_prepared_count(q, KD_SPLIT_TEST) == kd_prepared_count(p, KD_SPLIT_TEST));
  CHECK(kd_prepared_vocab_size(q) == kd_prepared_vocab_size(p));
  kd_prepared_free(p);
  kd_prepared_free(q);
  fs::remove_all(dir);
}

TEST_CASE("labels are shifted to start at zero") {
  const auto path = scratch("shifted.csv");
  {
    std::string csv = "id,text,label\n";
    for (int i = 0; i < 12; ++i) {
      csv += "r" + std::to_string(i) + ",word" + std::to_string(i % 3) + " x," +
             std::to_string(1 + i % 3) + "\n";
    }
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs(csv.c_str(), f);
    std::fclose(f);
  }
  kd_corpus* c = nullptr;
  REQUIRE(kd_corpus_load(path.c_str(), KD_FORMAT_AUTO, 0, &c) == KD_OK);
  kd_prepare_options po;
  kd_prepare_options_default(&po);
  kd_prepared* p = nullptr;
  REQUIRE(kd_prepare(c, &po, &p) == KD_OK);
  CHECK(kd_prepared_label_offset(p) == 1);
  CHECK(kd_prepared_num_classes(p) == 3);
  kd_prepared_free(p);
  kd_corpus_free(c);
  fs::remove(path);
}

TEST_CASE("train, save, load, predict and export soft labels") {
  kd_prepared* p = small_prepared(3, 20, 2);
  kd_train_options o;
  kd_train_options_student(&o);
  o.max_epochs = 2;
  o.seed = 5;
  int epochs_seen = 0;
  auto cb = [](int, double, double, double, void* user) { ++*static_cast<int*>(user); };
  kd_model* m = nullptr;
  REQUIRE(kd_train(p, &o, nullptr, cb, &epochs_seen, &m) == KD_OK);
  CHECK(epochs_seen == 2);
  CHECK(kd_model_num_classes(m) == 3);
  CHECK(kd_model_param_count(m) == kd_param_count(512, 32, 16, 16, 3));

  const auto ck = scratch("m.ckpt");
  REQUIRE(kd_model_save(m, ck.c_str()) == KD_OK);
  kd_model* back = nullptr;
  REQUIRE(kd_model_load(ck.c_str(), &back) == KD_OK);
  double a[3], b[3];
  REQUIRE(kd_model_predict_proba(m, "k0w1 k0w2 f3", a, 3) == KD_OK);
  REQUIRE(kd_model_predict_proba(back, "k0w1 k0w2 f3", b, 3) == KD_OK);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
  CHECK(std::abs(a[0] + a[1] + a[2] - 1.0) < 1e-12);
  CHECK(kd_model_predict_proba(m, "x", a, 2) == KD_ERR_USAGE);

  char* report = nullptr;
  REQUIRE(kd_model_report_json(m, &report) == KD_OK);
  CHECK(take(report).find("best_epoch") != std::string::npos);

  kd_soft_labels* soft = nullptr;
  REQUIRE(kd_model_soft_labels(m, p, KD_SPLIT_ALL, &soft) == KD_OK);
  CHECK(kd_soft_labels_count(soft) == 60);
  const auto sl = scratch("soft.jsonl");
  REQUIRE(kd_soft_labels_save(soft, sl.c_str()) == KD_OK);
  kd_soft_labels* reread = nullptr;
  REQUIRE(kd_soft_labels_load(sl.c_str(), 3, &reread) == KD_OK);
  char *s1 = nullptr, *s2 = nullptr;
  kd_soft_labels_serialize(soft, &s1);
  kd_soft_labels_serialize(reread, &s2);
  CHECK(take(s1) == take(s2));
  kd_soft_labels* wrong = nullptr;
  CHECK(kd_soft_labels_load(sl.c_str(), 4, &wrong) == KD_ERR_DATA);

  kd_model* student = nullptr;
  o.lambda = 0.5;
  REQUIRE(kd_train(p, &o, soft, nullptr, nullptr, &student) == KD_OK);
  char* ev = nullptr;
  REQUIRE(kd_evaluate(student, p, KD_SPLIT_TEST, &ev) == KD_OK);
  CHECK(take(ev).find("\"f1\"") != std::string::npos);

  char* bench = nullptr;
  REQUIRE(kd_bench(student, m, p, 4, 1, 30, &bench) == KD_OK);
  CHECK(take(bench).find("speedup") != std::string::npos);
  CHECK(kd_bench(student, m, p, 4, 1, 5, &bench) == KD_ERR_USAGE);

  // tampering is a data error
  {
    FILE* f = std::fopen(ck.c_str(), "r+");
    std::fseek(f, -40, SEEK_END);
    const int ch = std::fgetc(f);
    std::fseek(f, -40, SEEK_END);
    std::fputc(ch == '1' ? '2' : '1', f);
    std::fclose(f);
  }
  kd_model* bad = nullptr;
  CHECK(kd_model_load(ck.c_str(), &bad) == KD_ERR_DATA);
  CHECK(std::string(kd_last_error()).find("checksum") != std::string::npos);

  kd_model_free(student);
  kd_soft_labels_free(soft);
  kd_soft_labels_free(reread);
  kd_model_free(back);
  kd_model_free(m);
  kd_prepared_free(p);
  fs::remove(ck);
  fs::remove(sl);
}

TEST_CASE("training failures surface as training errors") {
  kd_prepared* p = small_prepared(3, 10, 3);
  kd_train_options o;
  kd_train_options_student(&o);
  o.max_epochs = 1;
  o.learning_rate = 1e308;
  o.clip_norm = 0;
  kd_model* m = nullptr;
  const kd_status s = kd_train(p, &o, nullptr, nullptr, nullptr, &m);
  CHECK(s == KD_ERR_TRAINING);
  CHECK(m == nullptr);
  kd_prepared_free(p);
}
