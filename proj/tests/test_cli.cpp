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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "kdistill_cli_test";

int run(const std::string& args) {
  const std::string cmd =
      "cd '" + kWork.string() + "' && '" KDISTILL_CLI "' " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    REQUIRE(run("synth --k 3 --n 30 --noise 0.1 --seed 1 --out d.jsonl") == 0);
    REQUIRE(run("prepare --data d.jsonl --out prep --seed 1 --max-len 32") == 0);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Workspace, "end-to-end pipeline with manifests") {
  CHECK(fs::exists(kWork / "d.jsonl.manifest.json"));
  CHECK(fs::exists(kWork / "prep" / "manifest.json"));
  const auto pm = nlohmann::json::parse(slurp(kWork / "prep" / "manifest.json"));
  CHECK(pm["command"] == "prepare");
  CHECK(pm["inputs"][0]["sha256"].get<std::string>().size() == 64);
  CHECK(pm["details"]["counts"]["train"] == 64);

  REQUIRE(run("train-teacher --data prep --out t.ckpt --seed 2 --max-epochs 2 --quiet") == 0);
  REQUIRE(run("export-soft-labels --teacher t.ckpt --data prep --out soft.jsonl") == 0);
  CHECK(nlohmann::json::parse(slurp(kWork / "soft.jsonl.manifest.json"))["details"]["rows"] ==
        90);

  REQUIRE(run("distill --data prep --soft-labels soft.jsonl --lambda 0.2 --max-epochs 2 "
              "--out s.ckpt --seed 3 --quiet") == 0);
  CHECK(fs::exists(kWork / "s.ckpt"));
  CHECK(fs::exists(kWork / "s.ckpt.report.json"));
  const auto m = nlohmann::json::parse(slurp(kWork / "s.ckpt.manifest.json"));
  CHECK(m["seed"] == 3);
  CHECK(m["config"]["lambda"]["value"] == "0.2");
  CHECK(m["config"]["clip-norm"]["source"] == "default");

  REQUIRE(run("distill --data prep --teacher t.ckpt --max-epochs 1 --out s2.ckpt --quiet") == 0);

  REQUIRE(run("evaluate --model s.ckpt --data prep") == 0);
  const auto ev = nlohmann::json::parse(slurp(kWork / "out.txt"));
  CHECK(ev["n"] == 17);

  REQUIRE(run("bench --student s.ckpt --teacher t.ckpt --data prep --iters 30 --out b.json") ==
          0);
  CHECK(nlohmann::json::parse(slurp(kWork / "b.json"))["size"]["models"].size() == 2);

  REQUIRE(run("sweep --data prep --soft-labels soft.jsonl --grid 0.1,0.2 --replicates 1 "
              "--max-epochs 1 --out sw.json --quiet") == 0);
  CHECK(nlohmann::json::parse(slurp(kWork / "sw.json"))["grid"].size() == 2);
  CHECK(fs::exists(kWork / "sw.json.table.txt"));
}

TEST_CASE_FIXTURE(Workspace, "identical flags give byte-identical outputs") {
  const std::string flags = "distill --data prep --lambda 0 --max-epochs 2 --seed 9 --quiet";
  REQUIRE(run(flags + " --out a.ckpt") == 0);
  REQUIRE(run(flags + " --out b.ckpt") == 0);
  CHECK(slurp(kWork / "a.ckpt") == slurp(kWork / "b.ckpt"));
  CHECK(slurp(kWork / "a.ckpt.report.json") == slurp(kWork / "b.ckpt.report.json"));
}

TEST_CASE_FIXTURE(Workspace, "exit codes") {
  CHECK(run("distill --data prep --lambda 0.2 --out x.ckpt") == 1);
  CHECK(slurp(kWork / "err.txt").find("--soft-labels") != std::string::npos);
  CHECK(run("distill --data prep --bogus 1 --out x.ckpt") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("evaluate --data prep") == 1);
  CHECK(run("prepare --data missing.jsonl --out p2") == 2);

  // conflicting but legal: warn, still succeed
  REQUIRE(run("train-teacher --data prep --out t.ckpt --max-epochs 1 --quiet") == 0);
  CHECK(run("distill --data prep --teacher t.ckpt --lambda 0 --max-epochs 1 --out y.ckpt "
            "--quiet") == 0);
  CHECK(slurp(kWork / "err.txt").find("warning") != std::string::npos);

  // tampered checkpoint
  std::string ck = slurp(kWork / "y.ckpt");
  const auto pos = ck.rfind("block output.bias");
  const auto digit = ck.find_first_of("123456789", pos + 30);
  ck[digit] = ck[digit] == '9' ? '8' : '9';
  std::ofstream(kWork / "y.ckpt", std::ios::binary) << ck;
  CHECK(run("evaluate --model y.ckpt --data prep") == 2);
  CHECK(slurp(kWork / "err.txt").find("checksum") != std::string::npos);

  // divergent training
  CHECK(run("distill --data prep --lambda 0 --lr 1e308 --clip-norm 0 --max-epochs 1 "
            "--out z.ckpt") == 3);
}

TEST_CASE_FIXTURE(Workspace, "config files sit below flags") {
  std::ofstream(kWork / "run.cfg") << "# defaults\nmax-epochs = 1\nseed=4\nlambda=0\n";
  REQUIRE(run("distill --config run.cfg --data prep --seed 5 --out c.ckpt --quiet") == 0);
  const auto m = nlohmann::json::parse(slurp(kWork / "c.ckpt.manifest.json"));
  CHECK(m["seed"] == 5);
  CHECK(m["config"]["max-epochs"]["value"] == "1");
  CHECK(m["config"]["max-epochs"]["source"] == "config");
  CHECK(m["config"]["seed"]["source"] == "flag");
  CHECK(m["config_file"]["sha256"].get<std::string>().size() == 64);

  std::ofstream(kWork / "bad.cfg") << "nonsense-key=3\n";
  CHECK(run("distill --config bad.cfg --data prep --out d.ckpt") == 1);
}

TEST_CASE_FIXTURE(Workspace, "dash writes data to stdout") {
  REQUIRE(run("synth --k 2 --n 3 --out -") == 0);
  const auto text = slurp(kWork / "out.txt");
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
  CHECK(text.find("\"id\":\"syn00000\"") != std::string::npos);
}
