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

#include <charconv>
#include <sstream>

#include "checksum.hpp"
#include "error.hpp"
#include "train.hpp"

namespace kdistill::nn {

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},       {"embed_dim", c.embed_dim},
                     {"lstm_units", c.lstm_units},       {"dense_units", c.dense_units},
                     {"num_classes", c.num_classes},     {"dropout_embed", c.dropout_embed},
                     {"dropout_dense", c.dropout_dense}, {"max_len", c.max_len}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("lstm_units").get_to(c.lstm_units);
  j.at("dense_units").get_to(c.dense_units);
  j.at("num_classes").get_to(c.num_classes);
  j.at("dropout_embed").get_to(c.dropout_embed);
  j.at("dropout_dense").get_to(c.dropout_dense);
  j.at("max_len").get_to(c.max_len);
}

}  // namespace kdistill::nn

namespace kdistill::distill {

void to_json(nlohmann::json& j, const LossBreakdown& l) {
  j = nlohmann::json{
      {"hard", l.hard}, {"soft", l.soft}, {"combined", l.combined}, {"lambda", l.lambda}};
}

void from_json(const nlohmann::json& j, LossBreakdown& l) {
  j.at("hard").get_to(l.hard);
  j.at("soft").get_to(l.soft);
  j.at("combined").get_to(l.combined);
  j.at("lambda").get_to(l.lambda);
}

}  // namespace kdistill::distill

namespace kdistill::corpus {

void to_json(nlohmann::json& j, const LabelSpace& l) {
  j = nlohmann::json{{"num_classes", l.num_classes}, {"names", l.names}};
}

void from_json(const nlohmann::json& j, LabelSpace& l) {
  j.at("num_classes").get_to(l.num_classes);
  l.names = j.value("names", std::vector<std::string>{});
}

}  // namespace kdistill::corpus

namespace kdistill::train {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"learning_rate", c.adam.learning_rate},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"eps_adam", c.adam.epsilon},
                     {"batch_size", c.batch_size},
                     {"max_epochs", c.max_epochs},
                     {"patience", c.patience},
                     {"min_delta", c.min_delta},
                     {"clip_norm", c.clip_norm},
                     {"seed", c.seed},
                     {"model", c.model}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("lambda").get_to(c.lambda);
  j.at("learning_rate").get_to(c.adam.learning_rate);
  j.at("beta1").get_to(c.adam.beta1);
  j.at("beta2").get_to(c.adam.beta2);
  j.at("eps_adam").get_to(c.adam.epsilon);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("min_delta").get_to(c.min_delta);
  j.at("clip_norm").get_to(c.clip_norm);
  j.at("seed").get_to(c.seed);
  j.at("model").get_to(c.model);
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"train", r.train},
                     {"val_loss", r.val_loss},
                     {"val_accuracy", r.val_accuracy}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("train").get_to(r.train);
  j.at("val_loss").get_to(r.val_loss);
  j.at("val_accuracy").get_to(r.val_accuracy);
}

void to_json(nlohmann::json& j, const TrainReport& r) {
  j = nlohmann::json{{"epochs", r.epochs},
                     {"best_epoch", r.best_epoch},
                     {"best_val_loss", r.best_val_loss},
                     {"stop_reason", r.stop_reason},
                     {"lambda", r.lambda}};
}

void from_json(const nlohmann::json& j, TrainReport& r) {
  j.at("epochs").get_to(r.epochs);
  j.at("best_epoch").get_to(r.best_epoch);
  j.at("best_val_loss").get_to(r.best_val_loss);
  j.at("stop_reason").get_to(r.stop_reason);
  j.at("lambda").get_to(r.lambda);
}

// Layout:
//   kdistill-checkpoint
//   version <n>
//   sha256 <hex digest of everything below this line>
//   model <json>
//   labels <json>
//   train_config <json>
//   history <json>
//   vocab <count>
//   <token>            (count lines)
//   block <name> <rows> <cols>
//   <row values>       (rows lines, space separated)
//   ...
//   end
namespace {

constexpr std::string_view kMagic = "kdistill-checkpoint";

class LineReader {
 public:
  explicit LineReader(std::string_view content) : content_(content) {}

  bool done() const { return pos_ >= content_.size(); }

  std::string_view next() {
    if (done()) throw DataError("checkpoint truncated");
    std::size_t end = content_.find('\n', pos_);
    if (end == std::string_view::npos) end = content_.size();
    std::string_view line = content_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  std::string_view rest() const {
    return pos_ >= content_.size() ? std::string_view{} : content_.substr(pos_);
  }

  std::size_t line() const { return line_; }

 private:
  std::string_view content_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::string_view expect_prefix(std::string_view line, std::string_view key) {
  if (!line.starts_with(key) || line.size() <= key.size() || line[key.size()] != ' ') {
    throw DataError("checkpoint: expected '" + std::string(key) + "' entry");
  }
  return line.substr(key.size() + 1);
}

double parse_double(std::string_view token) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError("checkpoint: bad number '" + std::string(token) + "'");
  }
  return v;
}

long long parse_int(std::string_view token) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError("checkpoint: bad integer '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    if (end > pos) out.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

template <typename T>
T parse_json_entry(std::string_view line, std::string_view key) {
  try {
    return nlohmann::json::parse(expect_prefix(line, key)).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: malformed " + std::string(key) + " (" + e.what() + ")");
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error(ErrorKind::kInternal, "double formatting failed");
  return {buf, ptr};
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string body;
  body += "model " + nlohmann::json(ckpt.model).dump() + "\n";
  body += "labels " + nlohmann::json(ckpt.labels).dump() + "\n";
  body += "train_config " + nlohmann::json(ckpt.train_config).dump() + "\n";
  body += "history " + nlohmann::json(ckpt.history).dump() + "\n";
  const auto tokens = ckpt.vocab.regular_tokens();
  body += "vocab " + std::to_string(tokens.size()) + "\n";
  for (const auto& t : tokens) body += t + "\n";
  for (const auto& b : ckpt.params.blocks()) {
    body += "block " + b.name + " " + std::to_string(b.rows) + " " +
            std::to_string(b.cols) + "\n";
    for (Eigen::Index r = 0; r < b.rows; ++r) {
      for (Eigen::Index c = 0; c < b.cols; ++c) {
        if (c > 0) body += ' ';
        body += format_double(b.values[r * b.cols + c]);
      }
      body += '\n';
    }
  }
  body += "end\n";

  std::string out(kMagic);
  out += "\nversion " + std::to_string(kCheckpointVersion) + "\n";
  out += "sha256 " + sha256_hex(body) + "\n";
  out += body;
  return out;
}

Checkpoint parse_checkpoint(std::string_view content) {
  LineReader reader(content);
  if (reader.done() || reader.next() != kMagic) {
    throw DataError("not a kdistill checkpoint (bad magic line)");
  }
  const auto version_text = expect_prefix(reader.next(), "version");
  long long version = -1;
  try {
    version = parse_int(version_text);
  } catch (const DataError&) {
    throw DataError("checkpoint: unreadable version '" + std::string(version_text) + "'");
  }
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::string(version_text) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::string digest(expect_prefix(reader.next(), "sha256"));
  if (sha256_hex(reader.rest()) != digest) {
    throw DataError("checkpoint checksum mismatch: file is corrupted or was modified");
  }

  Checkpoint ckpt;
  ckpt.model = parse_json_entry<nn::ModelConfig>(reader.next(), "model");
  ckpt.labels = parse_json_entry<corpus::LabelSpace>(reader.next(), "labels");
  ckpt.train_config = parse_json_entry<TrainConfig>(reader.next(), "train_config");
  ckpt.history = parse_json_entry<TrainReport>(reader.next(), "history");
  ckpt.model.validate();

  const long long vocab_count = parse_int(expect_prefix(reader.next(), "vocab"));
  if (vocab_count < 0) throw DataError("checkpoint: negative vocabulary size");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(vocab_count));
  for (long long i = 0; i < vocab_count; ++i) tokens.emplace_back(reader.next());
  ckpt.vocab = corpus::Vocabulary::from_tokens(std::move(tokens));
  if (static_cast<long long>(ckpt.vocab.size()) > ckpt.model.vocab_size) {
    throw DataError("checkpoint: vocabulary larger than the model's embedding table");
  }

  ckpt.params = nn::ParamSet::zeros(ckpt.model);
  for (auto& b : ckpt.params.blocks()) {
    const auto header = split_spaces(expect_prefix(reader.next(), "block"));
    if (header.size() != 3 || header[0] != b.name || parse_int(header[1]) != b.rows ||
        parse_int(header[2]) != b.cols) {
      throw DataError("checkpoint: block '" + b.name + "' missing or misshapen");
    }
    for (Eigen::Index r = 0; r < b.rows; ++r) {
      const auto values = split_spaces(reader.next());
      if (static_cast<Eigen::Index>(values.size()) != b.cols) {
        throw DataError("checkpoint: block '" + b.name + "' row " + std::to_string(r) +
                        " has " + std::to_string(values.size()) + " values");
      }
      for (Eigen::Index c = 0; c < b.cols; ++c) {
        b.values[r * b.cols + c] = parse_double(values[c]);
      }
    }
  }
  if (reader.next() != "end") throw DataError("checkpoint: missing end marker");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace kdistill::train
