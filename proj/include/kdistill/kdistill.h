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

/* C interface to the kdistill knowledge-distillation toolkit.
 *
 * Objects are opaque handles created by kd_*_load / kd_*_create style calls
 * and released with the matching kd_*_free. Every fallible call returns a
 * kd_status; on failure kd_last_error() describes the problem for the
 * calling thread. Strings handed out through char** parameters are
 * NUL-terminated, heap-allocated and released with kd_string_free.
 */
#ifndef KDISTILL_KDISTILL_H_
#define KDISTILL_KDISTILL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(KD_BUILDING_LIBRARY)
#define KD_API __attribute__((visibility("default")))
#else
#define KD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values match the kdistill CLI exit codes. */
typedef enum kd_status {
  KD_OK = 0,
  KD_ERR_USAGE = 1,    /* invalid argument or option */
  KD_ERR_DATA = 2,     /* malformed or inconsistent input data, bad checkpoint */
  KD_ERR_TRAINING = 3, /* numerical failure during training */
  KD_ERR_INTERNAL = 4
} kd_status;

typedef enum kd_format {
  KD_FORMAT_AUTO = 0, /* by file extension: .csv is CSV, anything else JSONL */
  KD_FORMAT_CSV = 1,
  KD_FORMAT_JSONL = 2
} kd_format;

typedef enum kd_split_part {
  KD_SPLIT_TRAIN = 0,
  KD_SPLIT_VALIDATION = 1,
  KD_SPLIT_TEST = 2,
  KD_SPLIT_ALL = 3
} kd_split_part;

typedef struct kd_corpus kd_corpus;           /* labeled raw examples */
typedef struct kd_prepared kd_prepared;       /* cleaned 3-way split + vocabulary */
typedef struct kd_soft_labels kd_soft_labels; /* id -> teacher probabilities */
typedef struct kd_model kd_model;             /* trained model checkpoint */

KD_API const char* kd_version(void);
KD_API const char* kd_last_error(void);
KD_API void kd_string_free(char* s);
KD_API kd_status kd_file_sha256(const char* path, char out_hex[65]);

/* ---- corpora ----------------------------------------------------------- */

typedef struct kd_synth_options {
  int num_classes;
  int n_per_class;
  int words_per_class;
  double noise_rate;     /* probability of resampling a label, [0, 0.5) */
  double signature_rate; /* probability a word comes from the class signature */
  int filler_words;
  uint64_t seed;
} kd_synth_options;

KD_API void kd_synth_options_default(kd_synth_options* opts);

/* num_classes <= 0 infers K as 1 + max label. */
KD_API kd_status kd_corpus_load(const char* path, kd_format format, int num_classes,
                                kd_corpus** out);
KD_API kd_status kd_corpus_synthesize(const kd_synth_options* opts, kd_corpus** out);
KD_API kd_status kd_corpus_save(const kd_corpus* corpus, const char* path,
                                kd_format format);
/* Serialized corpus; used for writing to standard output. */
KD_API kd_status kd_corpus_serialize(const kd_corpus* corpus, kd_format format,
                                     char** out);
KD_API size_t kd_corpus_size(const kd_corpus* corpus);
KD_API int kd_corpus_num_classes(const kd_corpus* corpus);
KD_API void kd_corpus_free(kd_corpus* corpus);

/* ---- prepared datasets ------------------------------------------------- */

typedef struct kd_prepare_options {
  double train_ratio;
  double validation_ratio;
  double test_ratio;
  size_t vocab_size; /* capacity including <pad> and <unk> */
  size_t min_freq;
  int max_len;
  uint64_t seed;
} kd_prepare_options;

KD_API void kd_prepare_options_default(kd_prepare_options* opts);

/* Cleans (drops blank texts), shifts labels so the smallest is 0, splits
 * stratified by class and builds the vocabulary from the training part. */
KD_API kd_status kd_prepare(const kd_corpus* corpus, const kd_prepare_options* opts,
                            kd_prepared** out);
/* Writes train/validation/test .jsonl, vocab.txt and prepare.json to dir. */
KD_API kd_status kd_prepared_save(const kd_prepared* prepared, const char* dir);
KD_API kd_status kd_prepared_load(const char* dir, kd_prepared** out);
KD_API size_t kd_prepared_count(const kd_prepared* prepared, kd_split_part part);
KD_API int kd_prepared_num_classes(const kd_prepared* prepared);
/* Original label value mapped to class 0. */
KD_API int kd_prepared_label_offset(const kd_prepared* prepared);
KD_API size_t kd_prepared_vocab_size(const kd_prepared* prepared);
KD_API void kd_prepared_free(kd_prepared* prepared);

/* ---- soft labels ------------------------------------------------------- */

KD_API kd_status kd_soft_labels_load(const char* path, int num_classes,
                                     kd_soft_labels** out);
KD_API kd_status kd_soft_labels_save(const kd_soft_labels* labels, const char* path);
KD_API kd_status kd_soft_labels_serialize(const kd_soft_labels* labels, char** out);
KD_API size_t kd_soft_labels_count(const kd_soft_labels* labels);
KD_API int kd_soft_labels_num_classes(const kd_soft_labels* labels);
/* Copies the probability vector of `id` into probs[0..k). */
KD_API kd_status kd_soft_labels_get(const kd_soft_labels* labels, const char* id,
                                    double* probs, size_t k);
KD_API void kd_soft_labels_free(kd_soft_labels* labels);

/* ---- training ---------------------------------------------------------- */

typedef struct kd_train_options {
  double lambda; /* weight of the soft-label term; ignored without soft labels */
  double learning_rate;
  double beta1;
  double beta2;
  double eps_adam;
  int batch_size;
  int max_epochs;
  int patience;
  double min_delta;
  double clip_norm; /* global gradient norm cap, <= 0 disables */
  uint64_t seed;
  /* model */
  int vocab_size; /* vocabulary capacity; also the embedding row count */
  int embed_dim;
  int lstm_units;
  int dense_units;
  double dropout_embed;
  double dropout_dense;
  int max_len; /* <= 0: use the prepared dataset's max_len */
} kd_train_options;

/* Compact student defaults (23,269 parameters at K = 5). */
KD_API void kd_train_options_student(kd_train_options* opts);
/* Built-in teacher preset: same topology, scaled up. */
KD_API void kd_train_options_teacher(kd_train_options* opts);

typedef void (*kd_epoch_callback)(int epoch, double train_loss, double val_loss,
                                  double val_accuracy, void* user);

/* Trains on the prepared split. With soft_labels == NULL the objective is
 * plain cross entropy (lambda treated as 0); otherwise the soft labels must
 * cover every training id. */
KD_API kd_status kd_train(const kd_prepared* prepared, const kd_train_options* opts,
                          const kd_soft_labels* soft_labels, kd_epoch_callback on_epoch,
                          void* user, kd_model** out);

/* ---- models ------------------------------------------------------------ */

KD_API kd_status kd_model_load(const char* path, kd_model** out);
KD_API kd_status kd_model_save(const kd_model* model, const char* path);
KD_API size_t kd_model_param_count(const kd_model* model);
KD_API int kd_model_num_classes(const kd_model* model);
KD_API kd_status kd_model_report_json(const kd_model* model, char** out);
KD_API kd_status kd_model_config_json(const kd_model* model, char** out);
/* Class probabilities for one text; probs must hold num_classes values. */
KD_API kd_status kd_model_predict_proba(const kd_model* model, const char* text,
                                        double* probs, size_t k);
/* Runs the model as a teacher over part of the prepared dataset. */
KD_API kd_status kd_model_soft_labels(const kd_model* teacher,
                                      const kd_prepared* prepared, kd_split_part part,
                                      kd_soft_labels** out);
KD_API void kd_model_free(kd_model* model);

KD_API size_t kd_param_count(int vocab_size, int embed_dim, int lstm_units,
                             int dense_units, int num_classes);

/* ---- evaluation -------------------------------------------------------- */

/* Accuracy, macro F1, per-class scores and confusion matrix as JSON. */
KD_API kd_status kd_evaluate(const kd_model* model, const kd_prepared* prepared,
                             kd_split_part part, char** report_json);

/* Distills one student per (grid value, replicate); replicate r uses
 * base->seed + r. table_text may be NULL. */
KD_API kd_status kd_sweep(const kd_prepared* prepared, const kd_train_options* base,
                          const kd_soft_labels* soft_labels, const double* grid,
                          size_t grid_len, int replicates, int threads,
                          char** report_json, char** table_text);

/* Forward-pass latency (first batch_size test examples) and size comparison. */
KD_API kd_status kd_bench(const kd_model* student, const kd_model* teacher,
                          const kd_prepared* prepared, size_t batch_size, int warmup,
                          int iterations, char** report_json);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // KDISTILL_KDISTILL_H_
