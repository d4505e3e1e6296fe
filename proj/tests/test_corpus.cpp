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

#include <algorithm>
#include <filesystem>
#include <set>

#include "corpus.hpp"
#include "error.hpp"
#include "text.hpp"

using namespace kdistill;
using namespace kdistill::corpus;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kdistill_test_" + name);
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("csv dataset parses and infers K") {
  const auto ds = parse_dataset("id,text,label\na,hello there,0\nb,\"x, y\",2\nc,z,1\n",
                                Format::kCsv);
  CHECK(ds.examples.size() == 3);
  CHECK(ds.labels.num_classes == 3);
  CHECK(ds.examples[1].text == "x, y");
}

TEST_CASE("jsonl dataset parses; K override must cover labels") {
  const std::string jl = R"({"id":"a","text":"t","label":0}
{"id":"b","text":"u","label":1}
)";
  CHECK(parse_dataset(jl, Format::kJsonl).labels.num_classes == 2);
  CHECK(parse_dataset(jl, Format::kJsonl, 4).labels.num_classes == 4);
  CHECK_THROWS_AS(parse_dataset(jl, Format::kJsonl, 1), DataError);
}

TEST_CASE("empty text survives loading and is removed by clean") {
  const auto ds = parse_dataset("id,text,label\na,hi,0\nb,  ,1\nc,,1\n", Format::kCsv);
  CHECK(ds.examples.size() == 3);
  const auto cleaned = clean(ds.examples);
  REQUIRE(cleaned.size() == 1);
  CHECK(cleaned[0].id == "a");
  CHECK(clean({}).empty());
}

TEST_CASE("loader errors carry line numbers and ids") {
  CHECK(error_of([] {
          parse_dataset("id,text,label\nr7,a,0\nr7,b,1\n", Format::kCsv);
        }).find("r7") != std::string::npos);
  CHECK(error_of([] {
          parse_dataset("id,text,label\na,b,-1\n", Format::kCsv);
        }).find("negative label") != std::string::npos);
  CHECK(error_of([] {
          parse_dataset("{\"id\":\"a\",\"text\":\"b\",\"label\":0}\n{oops\n", Format::kJsonl);
        }).find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset("id,words,label\n", Format::kCsv), DataError);
}

TEST_CASE("label remap subtracts the minimum label") {
  std::vector<RawExample> ex{{"a", "x", 1}, {"b", "y", 3}, {"c", "z", 2}};
  CHECK(remap_labels_to_zero(ex) == 1);
  CHECK(ex[0].label == 0);
  CHECK(ex[1].label == 2);
}

TEST_CASE("dataset files round trip in both formats") {
  const std::vector<RawExample> ex{
      {"a", "plain", 0}, {"b", "comma, \"quote\"", 1}, {"c", "new\nline é", 2}};
  for (const auto fmt : {Format::kCsv, Format::kJsonl}) {
    const auto path = temp_path(fmt == Format::kCsv ? "rt.csv" : "rt.jsonl");
    save_dataset(path, ex, fmt);
    CHECK(format_from_path(path) == fmt);
    const auto back = load_dataset(path, fmt);
    CHECK(back.examples == ex);
    std::filesystem::remove(path);
  }
}

TEST_CASE("vocabulary ranks by frequency then first occurrence") {
  const std::vector<RawExample> train{{"1", "a b", 0}, {"2", "a c", 1}};
  const auto v = Vocabulary::build(train, 10, 1);
  CHECK(v.size() == 5);
  CHECK(v.tokens()[0] == "<pad>");
  CHECK(v.tokens()[1] == "<unk>");
  CHECK(v.id("<pad>") == 1);  // specials are not addressable from text
  CHECK(v.id("<unk>") == 1);
  CHECK(v.id("a") == 2);
  CHECK(v.id("b") == 3);
  CHECK(v.id("c") == 4);
  CHECK(v.id("zzz") == Vocabulary::kUnk);

  const auto small = Vocabulary::build(train, 3, 1);
  CHECK(small.size() == 3);
  CHECK(small.id("a") == 2);
  CHECK(small.id("b") == 1);

  const auto frequent = Vocabulary::build(train, 10, 2);
  CHECK(frequent.size() == 3);
  CHECK(frequent.id("c") == 1);

  CHECK(Vocabulary::parse(v.serialize()) == v);
}

TEST_CASE("encode lowercases, maps OOV to UNK, pads and truncates") {
  const auto v = Vocabulary::from_tokens({"a", "b"});
  const auto e = encode({"x", "A b", 0}, v, 4);
  CHECK(e.token_ids == std::vector<std::int32_t>{2, 3, 0, 0});
  CHECK(e.true_len == 2);
  CHECK(encode({"x", "zzz", 0}, v, 4).token_ids[0] == 1);

  std::string longer;
  for (int i = 0; i < 100; ++i) longer += "a ";
  const auto t = encode({"y", longer, 1}, v, 64);
  CHECK(t.true_len == 64);
  CHECK(t.token_ids.size() == 64);
  CHECK_THROWS_AS(encode({"z", "   ", 0}, v, 4), DataError);
}

TEST_CASE("stratified split follows 7:1:2 and is deterministic") {
  SynthConfig cfg;
  const auto ds = generate_synthetic(cfg).dataset;
  const auto s = stratified_split(ds.examples, 5, {}, 3);
  CHECK(s.train.size() == 700);
  CHECK(s.validation.size() == 100);
  CHECK(s.test.size() == 200);

  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const auto& e : *part) ids.insert(e.id);
  }
  CHECK(ids.size() == 1000);

  const auto again = stratified_split(ds.examples, 5, {}, 3);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  const auto other = stratified_split(ds.examples, 5, {}, 4);
  CHECK_FALSE(other.train == s.train);

  std::vector<RawExample> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({"e" + std::to_string(i), "w", 0});
  const auto t = stratified_split(ten, 1, {}, 0);
  CHECK(t.train.size() == 7);
  CHECK(t.validation.size() == 1);
  CHECK(t.test.size() == 2);

  std::vector<RawExample> tiny{{"a", "w", 0}, {"b", "w", 0}, {"c", "w", 0}, {"d", "w", 1}};
  CHECK_THROWS_AS(stratified_split(tiny, 2, {}, 0), DataError);
}

TEST_CASE("soft-label validation") {
  const LabelSpace k2{2, {}};
  CHECK(parse_soft_labels(R"({"id":"a","probs":[0.6,0.4]})", k2).size() == 1);
  CHECK(error_of([&] { parse_soft_labels(R"({"id":"a","probs":[0.5,0.4]})", k2); })
            .find("sum 0.9") != std::string::npos);
  CHECK(error_of([&] { parse_soft_labels(R"({"id":"a","probs":[0.5,0.3,0.2]})", k2); })
            .find("length 3") != std::string::npos);
  CHECK(error_of([&] { parse_soft_labels(R"({"id":"a","probs":[1.2,-0.2]})", k2); })
            .find("negative entry") != std::string::npos);
  CHECK(error_of([&] {
          parse_soft_labels("{\"id\":\"a\",\"probs\":[0.5,0.5]}\n{\"id\":\"a\",\"probs\":[1,0]}",
                            k2);
        }).find("duplicate") != std::string::npos);
  // within tolerance
  CHECK_NOTHROW(parse_soft_labels(R"({"id":"a","probs":[0.6000005,0.4]})", k2));
}

TEST_CASE("soft labels round trip exactly and align by id") {
  SoftLabelSet set(3);
  set.insert("x", {0.1, 0.2, 0.7});
  set.insert("y", {1.0 / 3, 1.0 / 3, 1.0 / 3});
  set.insert("z", {0.0, 1.0, 0.0});
  const auto path = temp_path("soft.jsonl");
  save_soft_labels(path, set);
  CHECK(load_soft_labels(path, {3, {}}) == set);
  std::filesystem::remove(path);

  const std::vector<std::string> ids{"z", "x"};
  CHECK(set.restrict_to(ids).size() == 2);
  const std::vector<std::string> missing{"q"};
  CHECK_THROWS_AS(set.restrict_to(missing), DataError);
}

TEST_CASE("synthetic corpus: shape, determinism, separability, noise") {
  SynthConfig cfg;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  CHECK(a.dataset.examples == b.dataset.examples);
  CHECK(a.dataset.examples.size() == 1000);
  std::vector<int> per_class(5, 0);
  for (const auto& e : a.dataset.examples) {
    ++per_class[e.label];
    const auto toks = text::tokenize(e.text);
    CHECK(toks.size() >= 10);
    CHECK(toks.size() <= 20);
    // every signature word present names the true class
    bool has_own = false;
    for (const auto& t : toks) {
      if (t[0] == 'k') {
        CHECK(t.rfind("k" + std::to_string(e.label) + "w", 0) == 0);
        has_own = true;
      }
    }
    CHECK(has_own);
  }
  CHECK(per_class == std::vector<int>(5, 200));

  cfg.noise_rate = 0.2;
  const auto noisy = generate_synthetic(cfg);
  int flipped = 0;
  for (std::size_t i = 0; i < noisy.dataset.examples.size(); ++i) {
    CHECK(noisy.dataset.examples[i].text == a.dataset.examples[i].text);
    CHECK(noisy.clean_labels[i] == a.dataset.examples[i].label);
    flipped += noisy.dataset.examples[i].label != noisy.clean_labels[i];
  }
  CHECK(flipped > 150);
  CHECK(flipped < 250);
  CHECK_THROWS_AS(generate_synthetic({.noise_rate = 0.5}), UsageError);
}
