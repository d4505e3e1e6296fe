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

#include "kdistill/kdistill.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "checksum.hpp"
#include "corpus.hpp"
#include "distill.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "json.hpp"
#include "nn.hpp"
#include "train.hpp"

using namespace kdistill;

struct kd_corpus {
  corpus::Dataset dataset;
};

struct kd_prepared {
  corpus::Split<corpus::RawExample> split;
  corpus::LabelSpace labels;
  int label_offset = 0;
  corpus::Vocabulary vocab;
  kd_prepare_options options{};
};

struct kd_soft_labels {
  corpus::SoftLabelSet set;
};

struct kd_model {
  train::Checkpoint checkpoint;
};

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string g_last_error;

template <typename F>
kd_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return KD_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<kd_status>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return KD_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KD_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw UsageError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

corpus::Format resolve_format(kd_format format, const std::filesystem::path& path) {
  switch (format) {
    case KD_FORMAT_CSV: return corpus::Format::kCsv;
    case KD_FORMAT_JSONL: return corpus::Format::kJsonl;
    case KD_FORMAT_AUTO: return corpus::format_from_path(path);
  }
  throw UsageError("unknown dataset format");
}

std::vector<corpus::RawExample> examples_of(const kd_prepared& p, kd_split_part part) {
  switch (part) {
    case KD_SPLIT_TRAIN: return p.split.train;
    case KD_SPLIT_VALIDATION: return p.split.validation;
    case KD_SPLIT_TEST: return p.split.test;
    case KD_SPLIT_ALL: {
      auto all = p.split.train;
      all.insert(all.end(), p.split.validation.begin(), p.split.validation.end());
      all.insert(all.end(), p.split.test.begin(), p.split.test.end());
      return all;
    }
  }
  throw UsageError("unknown split part");
}

std::string serialize_encoded(std::span<const corpus::RawExample> examples,
                              const corpus::Vocabulary& vocab, int max_len) {
  std::string out;
  for (const auto& ex : examples) {
    const auto enc = corpus::encode(ex, vocab, max_len);
    nlohmann::ordered_json row;
    row["id"] = ex.id;
    row["text"] = ex.text;
    row["label"] = ex.label;
    row["token_ids"] = std::vector<std::int32_t>(enc.token_ids.begin(),
                                                 enc.token_ids.begin() + enc.true_len);
    out += row.dump();
    out += '\n';
  }
  return out;
}

train::TrainConfig to_train_config(const kd_train_options& o, const kd_prepared& p) {
  train::TrainConfig c;
  c.lambda = o.lambda;
  c.adam = {o.learning_rate, o.beta1, o.beta2, o.eps_adam};
  c.batch_size = o.batch_size;
  c.max_epochs = o.max_epochs;
  c.patience = o.patience;
  c.min_delta = o.min_delta;
  c.clip_norm = o.clip_norm;
  c.seed = o.seed;
  c.model.vocab_size = o.vocab_size;
  c.model.embed_dim = o.embed_dim;
  c.model.lstm_units = o.lstm_units;
  c.model.dense_units = o.dense_units;
  c.model.num_classes = p.labels.num_classes;
  c.model.dropout_embed = o.dropout_embed;
  c.model.dropout_dense = o.dropout_dense;
  c.model.max_len = o.max_len > 0 ? o.max_len : p.options.max_len;
  c.validate();
  return c;
}

void fill_train_options(kd_train_options* o, const train::TrainConfig& c) {
  o->lambda = c.lambda;
  o->learning_rate = c.adam.learning_rate;
  o->beta1 = c.adam.beta1;
  o->beta2 = c.adam.beta2;
  o->eps_adam = c.adam.epsilon;
  o->batch_size = c.batch_size;
  o->max_epochs = c.max_epochs;
  o->patience = c.patience;
  o->min_delta = c.min_delta;
  o->clip_norm = c.clip_norm;
  o->seed = c.seed;
  o->vocab_size = c.model.vocab_size;
  o->embed_dim = c.model.embed_dim;
  o->lstm_units = c.model.lstm_units;
  o->dense_units = c.model.dense_units;
  o->dropout_embed = c.model.dropout_embed;
  o->dropout_dense = c.model.dropout_dense;
  o->max_len = 0;
}

}  // namespace

extern "C" {

KD_API const char* kd_version(void) { return kVersion; }

KD_API const char* kd_last_error(void) { return g_last_error.c_str(); }

KD_API void kd_string_free(char* s) { std::free(s); }

KD_API kd_status kd_file_sha256(const char* path, char out_hex[65]) {
  return guarded([&] {
    require(path, "path");
    require(out_hex, "out_hex");
    const std::string hex = sha256_file(path);
    std::memcpy(out_hex, hex.c_str(), 65);
  });
}

// --- corpora -----------------------------------------------------------------

KD_API void kd_synth_options_default(kd_synth_options* opts) {
  if (!opts) return;
  const corpus::SynthConfig d;
  opts->num_classes = d.num_classes;
  opts->n_per_class = d.n_per_class;
  opts->words_per_class = d.words_per_class;
  opts->noise_rate = d.noise_rate;
  opts->signature_rate = d.signature_rate;
  opts->filler_words = d.filler_words;
  opts->seed = d.seed;
}

KD_API kd_status kd_corpus_load(const char* path, kd_format format, int num_classes,
                                kd_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto ds = corpus::load_dataset(path, resolve_format(format, path),
                                   num_classes > 0 ? std::optional<int>(num_classes)
                                                   : std::nullopt);
    *out = new kd_corpus{std::move(ds)};
  });
}

KD_API kd_status kd_corpus_synthesize(const kd_synth_options* opts, kd_corpus** out) {
  return guarded([&] {
    require(opts, "opts");
    require(out, "out");
    corpus::SynthConfig c;
    c.num_classes = opts->num_classes;
    c.n_per_class = opts->n_per_class;
    c.words_per_class = opts->words_per_class;
    c.noise_rate = opts->noise_rate;
    c.signature_rate = opts->signature_rate;
    c.filler_words = opts->filler_words;
    c.seed = opts->seed;
    *out = new kd_corpus{corpus::generate_synthetic(c).dataset};
  });
}

KD_API kd_status kd_corpus_save(const kd_corpus* c, const char* path, kd_format format) {
  return guarded([&] {
    require(c, "corpus");
    require(path, "path");
    corpus::save_dataset(path, c->dataset.examples, resolve_format(format, path));
  });
}

KD_API kd_status kd_corpus_serialize(const kd_corpus* c, kd_format format, char** out) {
  return guarded([&] {
    require(c, "corpus");
    require(out, "out");
    const auto fmt = format == KD_FORMAT_CSV ? corpus::Format::kCsv : corpus::Format::kJsonl;
    *out = dup_string(corpus::serialize_dataset(c->dataset.examples, fmt));
  });
}

KD_API size_t kd_corpus_size(const kd_corpus* c) { return c ? c->dataset.examples.size() : 0; }

KD_API int kd_corpus_num_classes(const kd_corpus* c) {
  return c ? c->dataset.labels.num_classes : 0;
}

KD_API void kd_corpus_free(kd_corpus* c) { delete c; }

// --- prepared datasets -------------------------------------------------------

KD_API void kd_prepare_options_default(kd_prepare_options* opts) {
  if (!opts) return;
  opts->train_ratio = 0.7;
  opts->validation_ratio = 0.1;
  opts->test_ratio = 0.2;
  opts->vocab_size = 512;
  opts->min_freq = 1;
  opts->max_len = 64;
  opts->seed = 0;
}

KD_API kd_status kd_prepare(const kd_corpus* c, const kd_prepare_options* opts,
                            kd_prepared** out) {
  return guarded([&] {
    require(c, "corpus");
    require(opts, "opts");
    require(out, "out");
    if (opts->max_len < 1) throw UsageError("max_len must be positive");
    if (opts->vocab_size < 3) throw UsageError("vocab_size must be at least 3");
    auto examples = corpus::clean(c->dataset.examples);
    if (examples.empty()) throw DataError("no examples left after cleaning");
    auto p = std::make_unique<kd_prepared>();
    p->options = *opts;
    p->label_offset = corpus::remap_labels_to_zero(examples);
    int max_label = 0;
    for (const auto& ex : examples) max_label = std::max(max_label, ex.label);
    p->labels.num_classes =
        std::max(max_label + 1, c->dataset.labels.num_classes - p->label_offset);
    p->labels.names = c->dataset.labels.names;
    if (p->labels.num_classes < 2) throw DataError("dataset needs at least 2 classes");
    p->split = corpus::stratified_split(
        examples, p->labels.num_classes,
        {opts->train_ratio, opts->validation_ratio, opts->test_ratio}, opts->seed);
    p->vocab = corpus::Vocabulary::build(p->split.train, opts->vocab_size, opts->min_freq);
    *out = p.release();
  });
}

KD_API kd_status kd_prepared_save(const kd_prepared* p, const char* dir) {
  return guarded([&] {
    require(p, "prepared");
    require(dir, "dir");
    const std::filesystem::path root(dir);
    std::error_code ec;
    std::filesystem::create_directories(root, ec);
    if (ec) throw DataError("cannot create directory '" + root.string() + "'");
    const int max_len = p->options.max_len;
    write_file(root / "train.jsonl", serialize_encoded(p->split.train, p->vocab, max_len));
    write_file(root / "validation.jsonl",
               serialize_encoded(p->split.validation, p->vocab, max_len));
    write_file(root / "test.jsonl", serialize_encoded(p->split.test, p->vocab, max_len));
    write_file(root / "vocab.txt", p->vocab.serialize());
    nlohmann::ordered_json meta;
    meta["num_classes"] = p->labels.num_classes;
    meta["names"] = p->labels.names;
    meta["label_offset"] = p->label_offset;
    nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
    for (int k = 0; k < p->labels.num_classes; ++k) {
      mapping[std::to_string(k + p->label_offset)] = k;
    }
    meta["label_mapping"] = mapping;
    meta["ratios"] = {p->options.train_ratio, p->options.validation_ratio,
                      p->options.test_ratio};
    meta["vocab_size"] = p->options.vocab_size;
    meta["min_freq"] = p->options.min_freq;
    meta["max_len"] = p->options.max_len;
    meta["seed"] = p->options.seed;
    meta["counts"] = {{"train", p->split.train.size()},
                      {"validation", p->split.validation.size()},
                      {"test", p->split.test.size()}};
    write_file(root / "prepare.json", meta.dump(2) + "\n");
  });
}

KD_API kd_status kd_prepared_load(const char* dir, kd_prepared** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    const std::filesystem::path root(dir);
    const auto meta = nlohmann::json::parse(read_file(root / "prepare.json"));
    auto p = std::make_unique<kd_prepared>();
    p->labels.num_classes = meta.at("num_classes").get<int>();
    p->labels.names = meta.value("names", std::vector<std::string>{});
    p->label_offset = meta.value("label_offset", 0);
    const auto ratios = meta.at("ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw DataError("prepare.json: ratios must have 3 entries");
    p->options.train_ratio = ratios[0];
    p->options.validation_ratio = ratios[1];
    p->options.test_ratio = ratios[2];
    p->options.vocab_size = meta.at("vocab_size").get<std::size_t>();
    p->options.min_freq = meta.at("min_freq").get<std::size_t>();
    p->options.max_len = meta.at("max_len").get<int>();
    p->options.seed = meta.at("seed").get<std::uint64_t>();
    auto part = [&](const char* name) {
      return corpus::load_dataset(root / name, corpus::Format::kJsonl,
                                  p->labels.num_classes)
          .examples;
    };
    p->split.train = part("train.jsonl");
    p->split.validation = part("validation.jsonl");
    p->split.test = part("test.jsonl");
    p->vocab = corpus::Vocabulary::parse(read_file(root / "vocab.txt"));
    *out = p.release();
  });
}

KD_API size_t kd_prepared_count(const kd_prepared* p, kd_split_part part) {
  if (!p) return 0;
  switch (part) {
    case KD_SPLIT_TRAIN: return p->split.train.size();
    case KD_SPLIT_VALIDATION: return p->split.validation.size();
    case KD_SPLIT_TEST: return p->split.test.size();
    case KD_SPLIT_ALL:
      return p->split.train.size() + p->split.validation.size() + p->split.test.size();
  }
  return 0;
}

KD_API int kd_prepared_num_classes(const kd_prepared* p) {
  return p ? p->labels.num_classes : 0;
}

KD_API int kd_prepared_label_offset(const kd_prepared* p) { return p ? p->label_offset : 0; }

KD_API size_t kd_prepared_vocab_size(const kd_prepared* p) { return p ? p->vocab.size() : 0; }

KD_API void kd_prepared_free(kd_prepared* p) { delete p; }

// --- soft labels -------------------------------------------------------------

KD_API kd_status kd_soft_labels_load(const char* path, int num_classes,
                                     kd_soft_labels** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    if (num_classes < 2) throw UsageError("num_classes must be at least 2");
    corpus::LabelSpace labels{num_classes, {}};
    *out = new kd_soft_labels{corpus::load_soft_labels(path, labels)};
  });
}

KD_API kd_status kd_soft_labels_save(const kd_soft_labels* s, const char* path) {
  return guarded([&] {
    require(s, "soft_labels");
    require(path, "path");
    corpus::save_soft_labels(path, s->set);
  });
}

KD_API kd_status kd_soft_labels_serialize(const kd_soft_labels* s, char** out) {
  return guarded([&] {
    require(s, "soft_labels");
    require(out, "out");
    *out = dup_string(corpus::serialize_soft_labels(s->set));
  });
}

KD_API size_t kd_soft_labels_count(const kd_soft_labels* s) { return s ? s->set.size() : 0; }

KD_API int kd_soft_labels_num_classes(const kd_soft_labels* s) {
  return s ? s->set.num_classes() : 0;
}

KD_API kd_status kd_soft_labels_get(const kd_soft_labels* s, const char* id, double* probs,
                                    size_t k) {
  return guarded([&] {
    require(s, "soft_labels");
    require(id, "id");
    require(probs, "probs");
    const auto& v = s->set.at(id);
    if (k < v.size()) throw UsageError("probs buffer too small");
    std::copy(v.begin(), v.end(), probs);
  });
}

KD_API void kd_soft_labels_free(kd_soft_labels* s) { delete s; }

// --- training ----------------------------------------------------------------

KD_API void kd_train_options_student(kd_train_options* opts) {
  if (!opts) return;
  train::TrainConfig c;
  c.model = nn::ModelConfig::student(2);
  fill_train_options(opts, c);
}

KD_API void kd_train_options_teacher(kd_train_options* opts) {
  if (!opts) return;
  train::TrainConfig c;
  c.lambda = 0.0;
  c.model = nn::ModelConfig::teacher(2);
  fill_train_options(opts, c);
}

KD_API kd_status kd_train(const kd_prepared* p, const kd_train_options* opts,
                          const kd_soft_labels* soft, kd_epoch_callback on_epoch,
                          void* user, kd_model** out) {
  return guarded([&] {
    require(p, "prepared");
    require(opts, "opts");
    require(out, "out");
    const auto cfg = to_train_config(*opts, *p);
    auto vocab = corpus::Vocabulary::build(p->split.train,
                                           static_cast<std::size_t>(cfg.model.vocab_size),
                                           p->options.min_freq);
    const auto split = corpus::encode_split(p->split, vocab, cfg.model.max_len);
    train::EpochCallback cb;
    if (on_epoch) {
      cb = [on_epoch, user](const train::EpochRecord& r) {
        on_epoch(r.epoch, r.train.combined, r.val_loss, r.val_accuracy, user);
      };
    }
    auto result = train::train_model(cfg, split, soft ? &soft->set : nullptr, cb);
    auto model = std::make_unique<kd_model>();
    model->checkpoint.model = cfg.model;
    model->checkpoint.vocab = std::move(vocab);
    model->checkpoint.labels = p->labels;
    model->checkpoint.params = std::move(result.params);
    model->checkpoint.train_config = cfg;
    model->checkpoint.train_config.lambda = result.report.lambda;
    model->checkpoint.history = std::move(result.report);
    *out = model.release();
  });
}

// --- models ------------------------------------------------------------------

KD_API kd_status kd_model_load(const char* path, kd_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new kd_model{train::load_checkpoint(path)};
  });
}

KD_API kd_status kd_model_save(const kd_model* m, const char* path) {
  return guarded([&] {
    require(m, "model");
    require(path, "path");
    train::save_checkpoint(path, m->checkpoint);
  });
}

KD_API size_t kd_model_param_count(const kd_model* m) {
  return m ? nn::param_count(m->checkpoint.model) : 0;
}

KD_API int kd_model_num_classes(const kd_model* m) {
  return m ? m->checkpoint.model.num_classes : 0;
}

KD_API kd_status kd_model_report_json(const kd_model* m, char** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    *out = dup_string(nlohmann::json(m->checkpoint.history).dump(2) + "\n");
  });
}

KD_API kd_status kd_model_config_json(const kd_model* m, char** out) {
  return guarded([&] {
    require(m, "model");
    require(out, "out");
    nlohmann::json j{{"model", m->checkpoint.model},
                     {"train", m->checkpoint.train_config},
                     {"labels", m->checkpoint.labels},
                     {"vocab_entries", m->checkpoint.vocab.size()},
                     {"param_count", nn::param_count(m->checkpoint.model)}};
    *out = dup_string(j.dump(2) + "\n");
  });
}

KD_API kd_status kd_model_predict_proba(const kd_model* m, const char* text, double* probs,
                                        size_t k) {
  return guarded([&] {
    require(m, "model");
    require(text, "text");
    require(probs, "probs");
    const auto& ck = m->checkpoint;
    if (k < static_cast<size_t>(ck.model.num_classes)) {
      throw UsageError("probs buffer too small");
    }
    const corpus::RawExample ex{"input", text, 0};
    const std::vector<corpus::EncodedExample> batch{
        corpus::encode(ex, ck.vocab, ck.model.max_len)};
    const auto q = nn::forward(ck.model, ck.params, batch, nn::Mode::kInfer).probs;
    for (int c = 0; c < ck.model.num_classes; ++c) probs[c] = q(0, c);
  });
}

KD_API kd_status kd_model_soft_labels(const kd_model* teacher, const kd_prepared* p,
                                      kd_split_part part, kd_soft_labels** out) {
  return guarded([&] {
    require(teacher, "teacher");
    require(p, "prepared");
    require(out, "out");
    const auto& ck = teacher->checkpoint;
    distill::TeacherSource source =
        distill::BuiltinTeacher{ck.model, ck.params, ck.vocab};
    const auto examples = examples_of(*p, part);
    *out = new kd_soft_labels{
        distill::generate_soft_labels(source, examples, p->labels.num_classes)};
  });
}

KD_API void kd_model_free(kd_model* m) { delete m; }

KD_API size_t kd_param_count(int vocab_size, int embed_dim, int lstm_units,
                             int dense_units, int num_classes) {
  nn::ModelConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = embed_dim;
  c.lstm_units = lstm_units;
  c.dense_units = dense_units;
  c.num_classes = num_classes;
  return nn::param_count(c);
}

// --- evaluation --------------------------------------------------------------

KD_API kd_status kd_evaluate(const kd_model* m, const kd_prepared* p, kd_split_part part,
                             char** report_json) {
  return guarded([&] {
    require(m, "model");
    require(p, "prepared");
    require(report_json, "report_json");
    if (m->checkpoint.model.num_classes != p->labels.num_classes) {
      throw DataError("model predicts " + std::to_string(m->checkpoint.model.num_classes) +
                      " classes, dataset has " + std::to_string(p->labels.num_classes));
    }
    const auto examples = examples_of(*p, part);
    if (examples.empty()) throw DataError("selected split is empty");
    const auto pred = eval::predict(m->checkpoint, examples);
    std::vector<int> truth;
    for (const auto& ex : examples) truth.push_back(ex.label);
    const auto report = eval::evaluate(pred, truth, p->labels.num_classes);
    *report_json = dup_string(eval::to_json(report).dump(2) + "\n");
  });
}

KD_API kd_status kd_sweep(const kd_prepared* p, const kd_train_options* base,
                          const kd_soft_labels* soft, const double* grid, size_t grid_len,
                          int replicates, int threads, char** report_json,
                          char** table_text) {
  return guarded([&] {
    require(p, "prepared");
    require(base, "base");
    require(soft, "soft_labels");
    require(grid, "grid");
    require(report_json, "report_json");
    const auto cfg = to_train_config(*base, *p);
    const auto vocab = corpus::Vocabulary::build(
        p->split.train, static_cast<std::size_t>(cfg.model.vocab_size), p->options.min_freq);
    const auto split = corpus::encode_split(p->split, vocab, cfg.model.max_len);
    const auto report = eval::lambda_sweep(cfg, std::span<const double>(grid, grid_len),
                                           replicates, split, soft->set, threads);
    *report_json = dup_string(eval::to_json(report).dump(2) + "\n");
    if (table_text) *table_text = dup_string(eval::render_sweep_table(report));
  });
}

KD_API kd_status kd_bench(const kd_model* student, const kd_model* teacher,
                          const kd_prepared* p, size_t batch_size, int warmup,
                          int iterations, char** report_json) {
  return guarded([&] {
    require(student, "student");
    require(teacher, "teacher");
    require(p, "prepared");
    require(report_json, "report_json");
    if (batch_size == 0) throw UsageError("batch_size must be positive");
    const auto pool = examples_of(*p, KD_SPLIT_ALL);
    std::vector<corpus::RawExample> batch;
    auto source = p->split.test.empty() ? pool : p->split.test;
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(source[i % source.size()]);
    const auto latency = eval::latency_benchmark(student->checkpoint, teacher->checkpoint,
                                                 batch, warmup, iterations);
    const auto size = eval::size_report({eval::size_entry("student", student->checkpoint),
                                         eval::size_entry("teacher", teacher->checkpoint)});
    nlohmann::json j{{"latency", eval::to_json(latency)}, {"size", eval::to_json(size)}};
    *report_json = dup_string(j.dump(2) + "\n");
  });
}

}  // extern "C"
