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

#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "checksum.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "json.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace kdistill::corpus {

using nlohmann::json;

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

int parse_label(std::string_view field, std::size_t line) {
  int value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DataError(at_line(line) + "label '" + std::string(field) +
                    "' is not an integer");
  }
  return value;
}

void add_example(Dataset& ds, std::set<std::string, std::less<>>& seen,
                 RawExample ex, std::size_t line) {
  if (ex.id.empty()) throw DataError(at_line(line) + "empty id");
  if (ex.label < 0) {
    throw DataError(at_line(line) + "negative label " + std::to_string(ex.label) +
                    " for id '" + ex.id + "'");
  }
  if (!seen.insert(ex.id).second) {
    throw DataError(at_line(line) + "duplicate id '" + ex.id + "'");
  }
  ds.examples.push_back(std::move(ex));
}

void parse_csv(std::string_view content, Dataset& ds) {
  if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
  const auto records = csv::parse(content);
  if (records.empty()) throw DataError("empty CSV file (missing header)");
  const auto& header = records.front().fields;
  if (header != std::vector<std::string>{"id", "text", "label"}) {
    throw DataError(at_line(records.front().line) +
                    "expected header 'id,text,label'");
  }
  std::set<std::string, std::less<>> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;  // blank line
    if (rec.fields.size() != 3) {
      throw DataError(at_line(rec.line) + "expected 3 fields, found " +
                      std::to_string(rec.fields.size()));
    }
    RawExample ex{rec.fields[0], rec.fields[1], parse_label(rec.fields[2], rec.line)};
    add_example(ds, seen, std::move(ex), rec.line);
  }
}

void parse_jsonl(std::string_view content, Dataset& ds) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at_line(line_no) + "invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") ||
        !obj.contains("label")) {
      throw DataError(at_line(line_no) + "expected object with id, text, label");
    }
    if (!obj["id"].is_string() || !obj["text"].is_string()) {
      throw DataError(at_line(line_no) + "id and text must be strings");
    }
    if (!obj["label"].is_number_integer()) {
      throw DataError(at_line(line_no) + "label must be an integer");
    }
    const auto label = obj["label"].get<long long>();
    if (label > INT32_MAX || label < INT32_MIN) {
      throw DataError(at_line(line_no) + "label out of range");
    }
    RawExample ex{obj["id"].get<std::string>(), obj["text"].get<std::string>(),
                  static_cast<int>(label)};
    add_example(ds, seen, std::move(ex), line_no);
  }
}

}  // namespace

Format format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv" ? Format::kCsv : Format::kJsonl;
}

Dataset parse_dataset(std::string_view content, Format format,
                      std::optional<int> num_classes) {
  Dataset ds;
  if (format == Format::kCsv) {
    parse_csv(content, ds);
  } else {
    parse_jsonl(content, ds);
  }
  int max_label = -1;
  for (const auto& ex : ds.examples) max_label = std::max(max_label, ex.label);
  int k = max_label + 1;
  if (num_classes) {
    if (*num_classes < k) {
      throw DataError("label " + std::to_string(max_label) +
                      " does not fit the requested class count " +
                      std::to_string(*num_classes));
    }
    k = *num_classes;
  }
  if (k < 2) throw DataError("dataset needs at least 2 classes, found " + std::to_string(k));
  ds.labels.num_classes = k;
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Format format,
                     std::optional<int> num_classes) {
  try {
    return parse_dataset(read_file(path), format, num_classes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_dataset(std::span<const RawExample> examples, Format format) {
  std::string out;
  if (format == Format::kCsv) {
    out = "id,text,label\n";
    for (const auto& ex : examples) {
      out += csv::quote(ex.id);
      out += ',';
      out += csv::quote(ex.text);
      out += ',';
      out += std::to_string(ex.label);
      out += '\n';
    }
  } else {
    for (const auto& ex : examples) {
      nlohmann::ordered_json row;
      row["id"] = ex.id;
      row["text"] = ex.text;
      row["label"] = ex.label;
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

void save_dataset(const std::filesystem::path& path,
                  std::span<const RawExample> examples, Format format) {
  write_file(path, serialize_dataset(examples, format));
}

std::vector<RawExample> clean(std::vector<RawExample> examples) {
  std::erase_if(examples, [](const RawExample& ex) { return text::is_blank(ex.text); });
  return examples;
}

int remap_labels_to_zero(std::vector<RawExample>& examples) {
  if (examples.empty()) return 0;
  int lowest = examples.front().label;
  for (const auto& ex : examples) lowest = std::min(lowest, ex.label);
  for (auto& ex : examples) ex.label -= lowest;
  return lowest;
}

// --- Vocabulary --------------------------------------------------------------

Vocabulary::Vocabulary()
    : tokens_{std::string(kPadToken), std::string(kUnkToken)} {}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    const auto id = static_cast<std::int32_t>(v.tokens_.size());
    if (!v.index_.emplace(t, id).second) {
      throw DataError("duplicate vocabulary token '" + t + "'");
    }
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const RawExample> train, std::size_t max_size,
                             std::size_t min_freq) {
  struct Stat {
    std::size_t freq = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  std::size_t position = 0;
  for (const auto& ex : train) {
    for (auto& tok : text::tokenize(ex.text)) {
      auto [it, inserted] = stats.try_emplace(std::move(tok));
      if (inserted) it->second.first = position;
      ++it->second.freq;
      ++position;
    }
  }
  std::vector<std::pair<std::string, Stat>> ranked;
  for (auto& [tok, st] : stats) {
    if (st.freq >= min_freq) ranked.emplace_back(tok, st);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.freq != b.second.freq) return a.second.freq > b.second.freq;
    return a.second.first < b.second.first;
  });
  const std::size_t keep = max_size > 2 ? max_size - 2 : 0;
  if (ranked.size() > keep) ranked.resize(keep);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, st] : ranked) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 2; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view content) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    if (end > pos) tokens.emplace_back(content.substr(pos, end - pos));
    pos = end + 1;
  }
  return from_tokens(std::move(tokens));
}

// --- Encoding ----------------------------------------------------------------

EncodedExample encode(const RawExample& example, const Vocabulary& vocab, int max_len) {
  if (max_len < 1) throw UsageError("max_len must be positive");
  const auto tokens = text::tokenize(example.text);
  if (tokens.empty()) {
    throw DataError("example '" + example.id + "' has no tokens");
  }
  EncodedExample out;
  out.id = example.id;
  out.label = example.label;
  out.true_len = static_cast<int>(std::min<std::size_t>(tokens.size(), max_len));
  out.token_ids.assign(max_len, Vocabulary::kPad);
  for (int t = 0; t < out.true_len; ++t) out.token_ids[t] = vocab.id(tokens[t]);
  return out;
}

std::vector<EncodedExample> encode_all(std::span<const RawExample> examples,
                                       const Vocabulary& vocab, int max_len) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode(ex, vocab, max_len));
  return out;
}

DatasetSplit encode_split(const Split<RawExample>& split, const Vocabulary& vocab,
                          int max_len) {
  return {encode_all(split.train, vocab, max_len),
          encode_all(split.validation, vocab, max_len),
          encode_all(split.test, vocab, max_len)};
}

// --- Splitting ---------------------------------------------------------------

Split<RawExample> stratified_split(std::span<const RawExample> examples,
                                   int num_classes, const SplitRatios& ratios,
                                   std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  for (double x : r) {
    if (!(x > 0.0)) throw UsageError("split ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const int label = examples[i].label;
    if (label < 0 || label >= num_classes) {
      throw DataError("example '" + examples[i].id + "' has label " +
                      std::to_string(label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
    by_class[label].push_back(i);
  }

  std::vector<int> assignment(examples.size(), 0);
  for (int c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    const std::size_t n = members.size();
    if (n < 3) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(n) +
                      " examples; at least 3 are needed to populate every split");
    }
    Rng rng(derive_seed(seed, 0x5b117u, c));
    rng.shuffle(std::span<std::size_t>(members));

    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int j = 0; j < 3; ++j) {
      const double exact = static_cast<double>(n) * r[j];
      counts[j] = static_cast<std::size_t>(std::floor(exact));
      // snapped so that ties like 22.4 vs 6.4 do not depend on roundoff
      frac[j] = std::round((exact - static_cast<double>(counts[j])) * 1e9) / 1e9;
      assigned += counts[j];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
    for (int j = 0; j < 3; ++j) {
      if (counts[j] == 0) {
        const auto donor = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        --counts[donor];
        ++counts[j];
      }
    }
    std::size_t k = 0;
    for (int j = 0; j < 3; ++j) {
      for (std::size_t m = 0; m < counts[j]; ++m) assignment[members[k++]] = j;
    }
  }

  Split<RawExample> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    switch (assignment[i]) {
      case 0: out.train.push_back(examples[i]); break;
      case 1: out.validation.push_back(examples[i]); break;
      default: out.test.push_back(examples[i]); break;
    }
  }
  return out;
}

// --- Soft labels -------------------------------------------------------------

void validate_probabilities(std::string_view id, std::span<const double> probs,
                            int num_classes) {
  const std::string who = "soft label '" + std::string(id) + "': ";
  if (static_cast<int>(probs.size()) != num_classes) {
    throw DataError(who + "length " + std::to_string(probs.size()) + ", expected " +
                    std::to_string(num_classes));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!std::isfinite(probs[k])) {
      throw DataError(who + "non-finite entry at class " + std::to_string(k));
    }
    if (probs[k] < 0.0) {
      std::ostringstream ss;
      ss << who << "negative entry " << probs[k] << " at class " << k;
      throw DataError(ss.str());
    }
    sum += probs[k];
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    std::ostringstream ss;
    ss << who << "sum " << sum << " is outside 1 +/- " << kSimplexTolerance;
    throw DataError(ss.str());
  }
}

bool SoftLabelSet::contains(std::string_view id) const {
  return probs_.find(id) != probs_.end();
}

const std::vector<double>& SoftLabelSet::at(std::string_view id) const {
  auto it = probs_.find(id);
  if (it == probs_.end()) {
    throw DataError("no soft label for id '" + std::string(id) + "'");
  }
  return it->second;
}

void SoftLabelSet::insert(std::string id, std::vector<double> probs) {
  validate_probabilities(id, probs, num_classes_);
  if (probs_.contains(id)) throw DataError("duplicate soft label id '" + id + "'");
  probs_.emplace(std::move(id), std::move(probs));
}

SoftLabelSet SoftLabelSet::restrict_to(std::span<const std::string> ids) const {
  SoftLabelSet out(num_classes_);
  for (const auto& id : ids) {
    if (out.contains(id)) continue;
    out.probs_.emplace(id, at(id));
  }
  return out;
}

SoftLabelSet parse_soft_labels(std::string_view content, const LabelSpace& labels) {
  SoftLabelSet set(labels.num_classes);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at_line(line_no) + "invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("probs") || !obj["probs"].is_array()) {
      throw DataError(at_line(line_no) + "expected {\"id\": string, \"probs\": [...]}");
    }
    std::vector<double> probs;
    for (const auto& v : obj["probs"]) {
      if (!v.is_number()) throw DataError(at_line(line_no) + "probs must be numbers");
      probs.push_back(v.get<double>());
    }
    try {
      set.insert(obj["id"].get<std::string>(), std::move(probs));
    } catch (const DataError& e) {
      throw DataError(at_line(line_no) + e.what());
    }
  }
  return set;
}

SoftLabelSet load_soft_labels(const std::filesystem::path& path,
                              const LabelSpace& labels) {
  try {
    return parse_soft_labels(read_file(path), labels);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_soft_labels(const SoftLabelSet& set) {
  std::string out;
  for (const auto& [id, probs] : set.entries()) {
    nlohmann::ordered_json row;
    row["id"] = id;
    row["probs"] = probs;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void save_soft_labels(const std::filesystem::path& path, const SoftLabelSet& set) {
  write_file(path, serialize_soft_labels(set));
}

// --- Synthetic corpora -------------------------------------------------------

std::string signature_word(int cls, int index) {
  return "k" + std::to_string(cls) + "w" + std::to_string(index);
}

std::string filler_word(int index) { return "f" + std::to_string(index); }

SyntheticCorpus generate_synthetic(const SynthConfig& config) {
  if (config.num_classes < 2) throw UsageError("synthetic corpus needs K >= 2");
  if (config.n_per_class < 1 || config.words_per_class < 1 || config.filler_words < 1) {
    throw UsageError("synthetic corpus sizes must be positive");
  }
  if (!(config.noise_rate >= 0.0 && config.noise_rate < 0.5)) {
    throw UsageError("noise_rate must lie in [0, 0.5)");
  }
  if (!(config.signature_rate > 0.0 && config.signature_rate <= 1.0)) {
    throw UsageError("signature_rate must lie in (0, 1]");
  }
  // Label noise draws from its own stream so texts do not depend on noise_rate.
  Rng rng(derive_seed(config.seed, 0x5e7u));
  Rng noise(derive_seed(config.seed, 0x401eu));
  SyntheticCorpus out;
  out.dataset.labels.num_classes = config.num_classes;
  const int total = config.num_classes * config.n_per_class;
  out.dataset.examples.reserve(total);
  out.clean_labels.reserve(total);
  int serial = 0;
  for (int c = 0; c < config.num_classes; ++c) {
    for (int j = 0; j < config.n_per_class; ++j) {
      const int length = 10 + static_cast<int>(rng.below(11));
      std::vector<std::string> words;
      bool has_signature = false;
      for (int w = 0; w < length; ++w) {
        if (rng.uniform() < config.signature_rate) {
          words.push_back(signature_word(c, static_cast<int>(rng.below(config.words_per_class))));
          has_signature = true;
        } else {
          words.push_back(filler_word(static_cast<int>(rng.below(config.filler_words))));
        }
      }
      if (!has_signature) {
        words[rng.below(length)] =
            signature_word(c, static_cast<int>(rng.below(config.words_per_class)));
      }
      int label = c;
      if (noise.uniform() < config.noise_rate) {
        const int other = static_cast<int>(noise.below(config.num_classes - 1));
        label = other >= c ? other + 1 : other;
      }
      std::string text;
      for (const auto& w : words) {
        if (!text.empty()) text.push_back(' ');
        text += w;
      }
      char id[32];
      std::snprintf(id, sizeof id, "syn%05d", serial++);
      out.dataset.examples.push_back({id, std::move(text), label});
      out.clean_labels.push_back(c);
    }
  }
  return out;
}

}  // namespace kdistill::corpus
