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

// Command-line front end. Talks to the library through the C API only.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kdistill/kdistill.h"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTraining = 3, kInternal = 4 };

struct Failure {
  int code;
  std::string message;
};

void check(kd_status s) {
  if (s != KD_OK) throw Failure{static_cast<int>(s), kd_last_error()};
}

[[noreturn]] void usage(const std::string& msg) { throw Failure{kUsage, msg}; }

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Corpus = std::unique_ptr<kd_corpus, Deleter<kd_corpus, kd_corpus_free>>;
using Prepared = std::unique_ptr<kd_prepared, Deleter<kd_prepared, kd_prepared_free>>;
using SoftLabels =
    std::unique_ptr<kd_soft_labels, Deleter<kd_soft_labels, kd_soft_labels_free>>;
using Model = std::unique_ptr<kd_model, Deleter<kd_model, kd_model_free>>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  kd_string_free(s);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Failure{kData, "cannot write '" + path + "'"};
}

std::string file_sha256(const std::string& path) {
  char hex[65];
  check(kd_file_sha256(path.c_str(), hex));
  return hex;
}

kd_format parse_format(const std::string& s) {
  if (s == "auto") return KD_FORMAT_AUTO;
  if (s == "csv") return KD_FORMAT_CSV;
  if (s == "jsonl") return KD_FORMAT_JSONL;
  usage("unknown format '" + s + "'");
}

kd_split_part parse_split(const std::string& s) {
  if (s == "train") return KD_SPLIT_TRAIN;
  if (s == "validation") return KD_SPLIT_VALIDATION;
  if (s == "test") return KD_SPLIT_TEST;
  if (s == "all") return KD_SPLIT_ALL;
  usage("unknown split '" + s + "'");
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage(std::string("bad number '") + item + "' in " + what);
    }
  }
  if (out.empty()) usage(std::string(what) + " must not be empty");
  return out;
}

// --config: plain key=value lines; keys are long flag names without dashes.
struct ConfigFile {
  std::string path;
  std::vector<std::pair<std::string, std::string>> entries;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::optional<ConfigFile> read_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return std::nullopt;
  std::ifstream f(path);
  if (!f) throw Failure{kData, "cannot read config '" + path + "'"};
  ConfigFile cfg{path, {}};
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Failure{kUsage, path + ":" + std::to_string(lineno) + ": expected key=value"};
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    if (key.empty() || key == "config") {
      throw Failure{kUsage, path + ":" + std::to_string(lineno) + ": bad key"};
    }
    cfg.entries.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  int threads = 1;
  bool quiet = false;
};

struct TrainFlags {
  kd_train_options opts{};
  void bind(CLI::App* sub, bool teacher) {
    if (teacher) {
      kd_train_options_teacher(&opts);
    } else {
      kd_train_options_student(&opts);
    }
    sub->add_option("--lr", opts.learning_rate, "Adam learning rate");
    sub->add_option("--beta1", opts.beta1, "Adam beta1");
    sub->add_option("--beta2", opts.beta2, "Adam beta2");
    sub->add_option("--eps-adam", opts.eps_adam, "Adam epsilon");
    sub->add_option("--batch-size", opts.batch_size, "Mini-batch size");
    sub->add_option("--max-epochs", opts.max_epochs, "Epoch cap");
    sub->add_option("--patience", opts.patience, "Early-stopping patience");
    sub->add_option("--min-delta", opts.min_delta, "Minimum validation improvement");
    sub->add_option("--clip-norm", opts.clip_norm, "Global gradient norm cap (<=0 off)");
    sub->add_option("--vocab-size", opts.vocab_size, "Vocabulary capacity");
    sub->add_option("--embed-dim", opts.embed_dim, "Embedding width");
    sub->add_option("--lstm-units", opts.lstm_units, "LSTM units per direction");
    sub->add_option("--dense-units", opts.dense_units, "Hidden dense width");
    sub->add_option("--dropout-embed", opts.dropout_embed, "Dropout after embedding");
    sub->add_option("--dropout-dense", opts.dropout_dense, "Dropout after dense layer");
    sub->add_option("--max-len", opts.max_len, "Sequence length (0: prepared value)");
  }
};

class Run {
 public:
  Run(std::string command, const Common& common, CLI::App* app, CLI::App* sub,
      const std::vector<std::string>& args, const std::optional<ConfigFile>& config)
      : command_(std::move(command)), common_(common), app_(app), sub_(sub),
        args_(args), config_(config), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const std::string& path) {
    if (fs::is_directory(path)) {
      for (const char* name :
           {"prepare.json", "vocab.txt", "train.jsonl", "validation.jsonl", "test.jsonl"}) {
        const auto p = (fs::path(path) / name).string();
        inputs_.push_back({{"role", role}, {"path", p}, {"sha256", file_sha256(p)}});
      }
      return;
    }
    inputs_.push_back({{"role", role}, {"path", path}, {"sha256", file_sha256(path)}});
  }

  void output(const std::string& path) { outputs_.push_back(path); }
  void timing(const std::string& name, double seconds) { timings_[name] = seconds; }
  ojson& extra() { return extra_; }

  double since_start() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  // Writes the manifest beside the outputs; "-" routes it to stderr.
  void finish(const std::string& manifest_path) {
    timings_["total_seconds"] = since_start();
    ojson m;
    m["tool"] = "kdistill";
    m["version"] = kd_version();
    m["command"] = command_;
    m["argv"] = args_;
    m["seed"] = common_.seed;
    m["config"] = resolved_config();
    if (config_) {
      m["config_file"] = {{"path", config_->path}, {"sha256", file_sha256(config_->path)}};
    }
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!extra_.empty()) m["details"] = extra_;
    m["timings"] = timings_;
    const std::string text = m.dump(2) + "\n";
    if (manifest_path == "-") {
      std::cerr << text;
    } else {
      write_text(manifest_path, text);
    }
  }

 private:
  ojson resolved_config() const {
    ojson cfg = ojson::object();
    auto collect = [&](const CLI::App* a) {
      for (const CLI::Option* opt : a->get_options()) {
        const std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames().front();
        if (name.empty() || name == "help" || name == "version") continue;
        std::string value;
        if (opt->count() > 0) {
          const auto& r = opt->results();
          for (std::size_t i = 0; i < r.size(); ++i) value += (i ? "," : "") + r[i];
        } else {
          value = opt->get_default_str();
        }
        std::string source = opt->count() > 0 ? "flag" : "default";
        if (opt->count() > 0 && config_ && !given_on_command_line(cli_args_only(), name)) {
          source = "config";
        }
        cfg[name] = {{"value", value}, {"source", source}};
      }
    };
    collect(app_);
    collect(sub_);
    return cfg;
  }

  std::vector<std::string> cli_args_only() const { return args_; }

  std::string command_;
  Common common_;
  const CLI::App* app_;
  const CLI::App* sub_;
  std::vector<std::string> args_;
  std::optional<ConfigFile> config_;
  std::chrono::steady_clock::time_point start_;
  ojson inputs_ = ojson::array();
  std::vector<std::string> outputs_;
  ojson timings_ = ojson::object();
  ojson extra_ = ojson::object();
};

std::string manifest_for(const std::string& out) {
  return out == "-" ? "-" : out + ".manifest.json";
}

void log_epoch(int epoch, double train_loss, double val_loss, double val_acc, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "epoch %3d  train_loss %.6f  val_loss %.6f  val_acc %.4f\n", epoch,
               train_loss, val_loss, val_acc);
}

Prepared load_prepared(const std::string& dir) {
  kd_prepared* p = nullptr;
  check(kd_prepared_load(dir.c_str(), &p));
  return Prepared(p);
}

Model load_model(const std::string& path) {
  kd_model* m = nullptr;
  check(kd_model_load(path.c_str(), &m));
  return Model(m);
}

SoftLabels load_soft(const std::string& path, int k) {
  kd_soft_labels* s = nullptr;
  check(kd_soft_labels_load(path.c_str(), k, &s));
  return SoftLabels(s);
}

// Soft labels from a file or from a built-in teacher checkpoint.
SoftLabels soft_source(Run& run, const kd_prepared* prepared, const std::string& soft_path,
                       const std::string& teacher_path, kd_split_part part) {
  const int k = kd_prepared_num_classes(prepared);
  if (!soft_path.empty()) {
    run.input("soft_labels", soft_path);
    return load_soft(soft_path, k);
  }
  run.input("teacher", teacher_path);
  const Model teacher = load_model(teacher_path);
  if (kd_model_num_classes(teacher.get()) != k) {
    throw Failure{kData, "teacher predicts " +
                             std::to_string(kd_model_num_classes(teacher.get())) +
                             " classes, dataset has " + std::to_string(k)};
  }
  kd_soft_labels* s = nullptr;
  check(kd_model_soft_labels(teacher.get(), prepared, part, &s));
  return SoftLabels(s);
}

void save_trained(Run& run, const kd_model* model, const std::string& out) {
  check(kd_model_save(model, out.c_str()));
  run.output(out);
  char* report = nullptr;
  check(kd_model_report_json(model, &report));
  const std::string report_path = out + ".report.json";
  write_text(report_path, take_string(report));
  run.output(report_path);
  run.extra()["param_count"] = kd_model_param_count(model);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<ConfigFile> config;
  try {
    config = read_config(args);
  } catch (const Failure& f) {
    std::cerr << "kdistill: " << f.message << "\n";
    return f.code;
  }
  std::vector<std::string> effective = args;
  if (config) {
    for (const auto& [key, value] : config->entries) {
      if (!given_on_command_line(args, key)) effective.push_back("--" + key + "=" + value);
    }
  }

  CLI::App app{"Knowledge distillation toolkit for compact text classifiers", "kdistill"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(kd_version()));

  Common common;
  app.add_option("--seed", common.seed, "Seed for every random stream");
  app.add_option("--config", common.config, "key=value file, lower precedence than flags");
  app.add_option("--threads", common.threads, "Worker cap")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", common.quiet, "Suppress progress logs");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  kd_synth_options synth_opts{};
  kd_synth_options_default(&synth_opts);
  std::string synth_out, synth_format = "auto";
  synth->add_option("--k", synth_opts.num_classes, "Number of classes");
  synth->add_option("--n", synth_opts.n_per_class, "Examples per class");
  synth->add_option("--words-per-class", synth_opts.words_per_class, "Signature words");
  synth->add_option("--noise", synth_opts.noise_rate, "Label noise rate");
  synth->add_option("--signature-rate", synth_opts.signature_rate,
                    "Probability a word is a signature word");
  synth->add_option("--filler-words", synth_opts.filler_words, "Shared filler vocabulary");
  synth->add_option("--out", synth_out, "Output file or - for stdout")->required();
  synth->add_option("--format", synth_format, "auto|csv|jsonl");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Clean, split and encode a dataset");
  kd_prepare_options prep_opts{};
  kd_prepare_options_default(&prep_opts);
  std::string prep_data, prep_out, prep_format = "auto", prep_ratios = "0.7,0.1,0.2";
  int prep_k = 0;
  prepare->add_option("--data", prep_data, "Dataset file (CSV or JSON Lines)")->required();
  prepare->add_option("--format", prep_format, "auto|csv|jsonl");
  prepare->add_option("--out", prep_out, "Output directory")->required();
  prepare->add_option("--num-classes", prep_k, "Class count override (0: infer)");
  prepare->add_option("--ratios", prep_ratios, "train,validation,test fractions");
  prepare->add_option("--vocab-size", prep_opts.vocab_size, "Vocabulary capacity");
  prepare->add_option("--min-freq", prep_opts.min_freq, "Minimum token frequency");
  prepare->add_option("--max-len", prep_opts.max_len, "Sequence length");

  // train-teacher
  auto* teach = app.add_subcommand("train-teacher", "Train the built-in teacher");
  TrainFlags teach_flags;
  std::string teach_data, teach_out;
  teach->add_option("--data", teach_data, "Prepared directory")->required();
  teach->add_option("--out", teach_out, "Checkpoint path")->required();
  teach_flags.bind(teach, true);

  // export-soft-labels
  auto* exp = app.add_subcommand("export-soft-labels", "Write teacher probabilities");
  std::string exp_teacher, exp_data, exp_out, exp_split = "all";
  exp->add_option("--teacher", exp_teacher, "Teacher checkpoint")->required();
  exp->add_option("--data", exp_data, "Prepared directory")->required();
  exp->add_option("--split", exp_split, "train|validation|test|all");
  exp->add_option("--out", exp_out, "Soft-label JSON Lines path or -")->required();

  // distill
  auto* dist = app.add_subcommand("distill", "Train a student with soft labels");
  TrainFlags dist_flags;
  std::string dist_data, dist_out, dist_soft, dist_teacher;
  double dist_lambda = 0.2;
  dist->add_option("--data", dist_data, "Prepared directory")->required();
  dist->add_option("--out", dist_out, "Checkpoint path")->required();
  dist->add_option("--lambda", dist_lambda, "Soft-label weight")->check(CLI::NonNegativeNumber);
  auto* dist_soft_opt = dist->add_option("--soft-labels", dist_soft, "Soft-label file");
  dist->add_option("--teacher", dist_teacher, "Built-in teacher checkpoint")
      ->excludes(dist_soft_opt);
  dist_flags.bind(dist, false);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  std::string ev_model, ev_data, ev_out = "-", ev_split = "test";
  evaluate->add_option("--model", ev_model, "Checkpoint")->required();
  evaluate->add_option("--data", ev_data, "Prepared directory")->required();
  evaluate->add_option("--split", ev_split, "train|validation|test|all");
  evaluate->add_option("--out", ev_out, "Report path or -");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Distill over a grid of lambda values");
  TrainFlags sweep_flags;
  std::string sw_data, sw_out, sw_soft, sw_teacher,
      sw_grid = "0.08,0.10,0.12,0.14,0.16,0.18,0.20";
  int sw_replicates = 3;
  sweep->add_option("--data", sw_data, "Prepared directory")->required();
  sweep->add_option("--out", sw_out, "Report path or -")->required();
  sweep->add_option("--grid", sw_grid, "Comma-separated lambda values");
  sweep->add_option("--replicates", sw_replicates, "Seeds per lambda")
      ->check(CLI::PositiveNumber);
  auto* sw_soft_opt = sweep->add_option("--soft-labels", sw_soft, "Soft-label file");
  sweep->add_option("--teacher", sw_teacher, "Built-in teacher checkpoint")
      ->excludes(sw_soft_opt);
  sweep_flags.bind(sweep, false);

  // bench
  auto* bench = app.add_subcommand("bench", "Compare latency and size of two models");
  std::string b_student, b_teacher, b_data, b_out = "-";
  std::size_t b_batch = 32;
  int b_warmup = 5, b_iters = 50;
  bench->add_option("--student", b_student, "Student checkpoint")->required();
  bench->add_option("--teacher", b_teacher, "Teacher checkpoint")->required();
  bench->add_option("--data", b_data, "Prepared directory")->required();
  bench->add_option("--batch-size", b_batch, "Examples per forward pass");
  bench->add_option("--warmup", b_warmup, "Untimed iterations");
  bench->add_option("--iters", b_iters, "Timed iterations (>= 30)");
  bench->add_option("--out", b_out, "Report path or -");

  std::vector<char*> cargv{argv[0]};
  for (auto& a : effective) cargv.push_back(a.data());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), common, &app, sub, args, config);
  if (config) run.input("config", config->path);

  try {
    if (sub == synth) {
      synth_opts.seed = common.seed;
      kd_corpus* c = nullptr;
      check(kd_corpus_synthesize(&synth_opts, &c));
      Corpus corpus(c);
      if (synth_out == "-") {
        char* text = nullptr;
        const auto fmt = synth_format == "csv" ? KD_FORMAT_CSV : KD_FORMAT_JSONL;
        check(kd_corpus_serialize(corpus.get(), fmt, &text));
        write_text("-", take_string(text));
      } else {
        check(kd_corpus_save(corpus.get(), synth_out.c_str(), parse_format(synth_format)));
        run.output(synth_out);
      }
      run.extra()["examples"] = kd_corpus_size(corpus.get());
      run.finish(manifest_for(synth_out));

    } else if (sub == prepare) {
      const auto ratios = parse_doubles(prep_ratios, "--ratios");
      if (ratios.size() != 3) usage("--ratios needs three values");
      prep_opts.train_ratio = ratios[0];
      prep_opts.validation_ratio = ratios[1];
      prep_opts.test_ratio = ratios[2];
      prep_opts.seed = common.seed;
      run.input("data", prep_data);
      kd_corpus* c = nullptr;
      check(kd_corpus_load(prep_data.c_str(), parse_format(prep_format), prep_k, &c));
      Corpus corpus(c);
      kd_prepared* p = nullptr;
      check(kd_prepare(corpus.get(), &prep_opts, &p));
      Prepared prepared(p);
      check(kd_prepared_save(prepared.get(), prep_out.c_str()));
      for (const char* name :
           {"train.jsonl", "validation.jsonl", "test.jsonl", "vocab.txt", "prepare.json"}) {
        run.output((fs::path(prep_out) / name).string());
      }
      auto& d = run.extra();
      d["num_classes"] = kd_prepared_num_classes(p);
      d["label_offset"] = kd_prepared_label_offset(p);
      d["vocab_entries"] = kd_prepared_vocab_size(p);
      d["counts"] = {{"train", kd_prepared_count(p, KD_SPLIT_TRAIN)},
                     {"validation", kd_prepared_count(p, KD_SPLIT_VALIDATION)},
                     {"test", kd_prepared_count(p, KD_SPLIT_TEST)}};
      run.finish((fs::path(prep_out) / "manifest.json").string());

    } else if (sub == teach) {
      run.input("data", teach_data);
      const Prepared prepared = load_prepared(teach_data);
      teach_flags.opts.seed = common.seed;
      teach_flags.opts.lambda = 0.0;
      kd_model* m = nullptr;
      check(kd_train(prepared.get(), &teach_flags.opts, nullptr, log_epoch, &common.quiet, &m));
      const Model model(m);
      run.timing("train_seconds", run.since_start());
      save_trained(run, model.get(), teach_out);
      run.finish(manifest_for(teach_out));

    } else if (sub == exp) {
      run.input("data", exp_data);
      const Prepared prepared = load_prepared(exp_data);
      const SoftLabels soft =
          soft_source(run, prepared.get(), "", exp_teacher, parse_split(exp_split));
      if (exp_out == "-") {
        char* text = nullptr;
        check(kd_soft_labels_serialize(soft.get(), &text));
        write_text("-", take_string(text));
      } else {
        check(kd_soft_labels_save(soft.get(), exp_out.c_str()));
        run.output(exp_out);
      }
      run.extra()["rows"] = kd_soft_labels_count(soft.get());
      run.finish(manifest_for(exp_out));

    } else if (sub == dist) {
      const bool has_source = !dist_soft.empty() || !dist_teacher.empty();
      if (dist_lambda > 0 && !has_source) {
        usage("distill with --lambda > 0 needs --soft-labels or --teacher");
      }
      if (dist_lambda == 0 && has_source) {
        std::cerr << "kdistill: warning: --lambda 0 ignores the soft-label source\n";
      }
      run.input("data", dist_data);
      const Prepared prepared = load_prepared(dist_data);
      SoftLabels soft;
      if (has_source) {
        soft = soft_source(run, prepared.get(), dist_soft, dist_teacher, KD_SPLIT_TRAIN);
      }
      dist_flags.opts.seed = common.seed;
      dist_flags.opts.lambda = dist_lambda;
      kd_model* m = nullptr;
      check(kd_train(prepared.get(), &dist_flags.opts, dist_lambda > 0 ? soft.get() : nullptr,
                     log_epoch, &common.quiet, &m));
      const Model model(m);
      run.timing("train_seconds", run.since_start());
      save_trained(run, model.get(), dist_out);
      run.finish(manifest_for(dist_out));

    } else if (sub == evaluate) {
      run.input("model", ev_model);
      run.input("data", ev_data);
      const Model model = load_model(ev_model);
      const Prepared prepared = load_prepared(ev_data);
      char* report = nullptr;
      check(kd_evaluate(model.get(), prepared.get(), parse_split(ev_split), &report));
      write_text(ev_out, take_string(report));
      if (ev_out != "-") run.output(ev_out);
      run.finish(manifest_for(ev_out));

    } else if (sub == sweep) {
      if (sw_soft.empty() && sw_teacher.empty()) usage("sweep needs --soft-labels or --teacher");
      const auto grid = parse_doubles(sw_grid, "--grid");
      run.input("data", sw_data);
      const Prepared prepared = load_prepared(sw_data);
      const SoftLabels soft =
          soft_source(run, prepared.get(), sw_soft, sw_teacher, KD_SPLIT_TRAIN);
      sweep_flags.opts.seed = common.seed;
      char* report = nullptr;
      char* table = nullptr;
      check(kd_sweep(prepared.get(), &sweep_flags.opts, soft.get(), grid.data(), grid.size(),
                     sw_replicates, common.threads, &report, &table));
      write_text(sw_out, take_string(report));
      const std::string table_text = take_string(table);
      if (sw_out != "-") {
        run.output(sw_out);
        write_text(sw_out + ".table.txt", table_text);
        run.output(sw_out + ".table.txt");
      }
      if (!common.quiet) std::cerr << table_text;
      run.finish(manifest_for(sw_out));

    } else if (sub == bench) {
      run.input("student", b_student);
      run.input("teacher", b_teacher);
      run.input("data", b_data);
      const Model student = load_model(b_student);
      const Model teacher = load_model(b_teacher);
      const Prepared prepared = load_prepared(b_data);
      char* report = nullptr;
      check(kd_bench(student.get(), teacher.get(), prepared.get(), b_batch, b_warmup, b_iters,
                     &report));
      write_text(b_out, take_string(report));
      if (b_out != "-") run.output(b_out);
      run.finish(manifest_for(b_out));
    }
  } catch (const Failure& f) {
    std::cerr << "kdistill " << sub->get_name() << ": " << f.message << "\n";
    return f.code;
  }
  return kOk;
}
