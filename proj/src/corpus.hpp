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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kdistill::corpus {

struct RawExample {
  std::string id;
  std::string text;
  int label = 0;

  bool operator==(const RawExample&) const = default;
};

struct LabelSpace {
  int num_classes = 0;
  std::vector<std::string> names;  // empty or num_classes entries
};

enum class Format { kCsv, kJsonl };

// ".csv" selects CSV, everything else JSON Lines.
Format format_from_path(const std::filesystem::path& path);

struct Dataset {
  std::vector<RawExample> examples;
  LabelSpace labels;
};

// Parses schema A (CSV with header id,text,label) or schema B (JSON Lines).
// K defaults to 1 + max label; an override smaller than that is rejected.
Dataset parse_dataset(std::string_view content, Format format,
                      std::optional<int> num_classes = std::nullopt);
Dataset load_dataset(const std::filesystem::path& path, Format format,
                     std::optional<int> num_classes = std::nullopt);

std::string serialize_dataset(std::span<const RawExample> examples, Format format);
void save_dataset(const std::filesystem::path& path,
                  std::span<const RawExample> examples, Format format);

// Drops examples whose text is empty or whitespace-only. Order preserved.
std::vector<RawExample> clean(std::vector<RawExample> examples);

// Shifts labels so the smallest becomes 0. Returns the original smallest
// label (the offset) so callers can record the mapping.
int remap_labels_to_zero(std::vector<RawExample>& examples);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Ranks tokens by frequency (descending), then first occurrence.
  static Vocabulary build(std::span<const RawExample> train, std::size_t max_size,
                          std::size_t min_freq);
  // `tokens` excludes the two reserved entries; ids start at 2.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  // Indexed by id, including the reserved entries.
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::string> regular_tokens() const;

  std::string serialize() const;  // one regular token per line
  static Vocabulary parse(std::string_view content);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct EncodedExample {
  std::string id;
  std::vector<std::int32_t> token_ids;  // length max_len, PAD-right
  int true_len = 0;
  int label = 0;
};

EncodedExample encode(const RawExample& example, const Vocabulary& vocab,
                      int max_len);
std::vector<EncodedExample> encode_all(std::span<const RawExample> examples,
                                       const Vocabulary& vocab, int max_len);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

using DatasetSplit = Split<EncodedExample>;

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

// Per-class seeded shuffle, then largest-remainder apportioning per class.
// Within each split, examples keep their dataset order.
Split<RawExample> stratified_split(std::span<const RawExample> examples,
                                   int num_classes, const SplitRatios& ratios,
                                   std::uint64_t seed);

DatasetSplit encode_split(const Split<RawExample>& split, const Vocabulary& vocab,
                          int max_len);

inline constexpr double kSimplexTolerance = 1e-6;

// Throws DataError naming `id` if probs is not a length-K probability vector.
void validate_probabilities(std::string_view id, std::span<const double> probs,
                            int num_classes);

class SoftLabelSet {
 public:
  explicit SoftLabelSet(int num_classes = 0) : num_classes_(num_classes) {}

  int num_classes() const { return num_classes_; }
  std::size_t size() const { return probs_.size(); }
  bool contains(std::string_view id) const;
  // Throws DataError when the id is absent.
  const std::vector<double>& at(std::string_view id) const;
  // Validates, then inserts; duplicate ids are rejected.
  void insert(std::string id, std::vector<double> probs);

  // Subset covering exactly `ids`; a missing id is a DataError.
  SoftLabelSet restrict_to(std::span<const std::string> ids) const;

  const std::map<std::string, std::vector<double>, std::less<>>& entries() const {
    return probs_;
  }

  bool operator==(const SoftLabelSet&) const = default;

 private:
  int num_classes_;
  std::map<std::string, std::vector<double>, std::less<>> probs_;
};

SoftLabelSet parse_soft_labels(std::string_view content, const LabelSpace& labels);
SoftLabelSet load_soft_labels(const std::filesystem::path& path,
                              const LabelSpace& labels);
std::string serialize_soft_labels(const SoftLabelSet& set);
void save_soft_labels(const std::filesystem::path& path, const SoftLabelSet& set);

struct SynthConfig {
  int num_classes = 5;
  int n_per_class = 200;
  int words_per_class = 20;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  // Probability that a word is drawn from the class signature rather than
  // the shared filler pool. At least one signature word is always present.
  double signature_rate = 0.5;
  int filler_words = 50;
};

struct SyntheticCorpus {
  Dataset dataset;
  // Pre-noise class per example, aligned with dataset.examples.
  std::vector<int> clean_labels;
};

SyntheticCorpus generate_synthetic(const SynthConfig& config);

// Word spelling used by the generator; exposed for separability checks.
std::string signature_word(int cls, int index);
std::string filler_word(int index);

}  // namespace kdistill::corpus
