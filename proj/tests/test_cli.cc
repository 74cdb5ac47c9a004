// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "psel/cli.h"
#include "psel/config.h"
#include "psel/error.h"
#include "psel/io.h"

namespace psel {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTinyConfig = R"(; tiny run for tests
[session]
seed = 3
[model]
layers = 1
heads = 2
dim = 8
seq_len = 8
[data]
count = 32
[plan]
phases = <1,1,2>:0.5 <1,2,4>:0.5
budget = 10
bootstrap_fraction = 0.2
batch_size = 8
[train]
samples = 2048
epochs = 2
batch_size = 64
)";

struct Workdir {
  fs::path root;
  explicit Workdir(const std::string& name) : root(fs::temp_directory_path() / ("psel_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
    write_text((root / "tiny.ini").string(), kTinyConfig);
  }
  ~Workdir() { fs::remove_all(root); }
  std::string config() const { return (root / "tiny.ini").string(); }
};

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::vector<const char*> argv{"psel"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  const Bytes b = read_file(p.string());
  return std::string(b.begin(), b.end());
}

TEST_SUITE("cli") {
  TEST_CASE("gen, train-approx and select are reproducible") {
    Workdir w("repro");
    const std::string a = (w.root / "a").string(), b = (w.root / "b").string();
    for (const auto& out : {a, b}) {
      REQUIRE(cli({"--config", w.config(), "--out", out, "gen"}) == 0);
      REQUIRE(cli({"--config", w.config(), "--out", out, "train-approx"}) == 0);
      REQUIRE(cli({"--config", w.config(), "--out", out, "--variant", "full", "select"}) == 0);
    }
    for (const char* f : {"model.sfmt", "dataset.sfds", "indices.txt", "report.json", "ledger.txt", "timeline.txt",
                          "train_report.json"}) {
      CHECK_MESSAGE(slurp(fs::path(a) / f) == slurp(fs::path(b) / f), std::string(f));
    }
    // The configs differ only in the output path.
    CHECK(parse_config(slurp(fs::path(a) / "config.ini")).paths.out == a);
    // Distinct specs <1,1,2> and <1,2,4> carry 2l+1 = 3 MLPs each.
    std::size_t mlps = 0;
    for (const auto& e : fs::recursive_directory_iterator(fs::path(a) / "mlp")) mlps += e.is_regular_file();
    CHECK(mlps == 6);

    const auto report = nlohmann::json::parse(slurp(fs::path(a) / "report.json"));
    CHECK(report.at("variant") == "full");
    CHECK(report.at("purchase").size() == 10);
    CHECK(report.at("reveals").at("audit") == "pass");
    CHECK(report.contains("schedule"));
    const auto indices = parse_indices(slurp(fs::path(a) / "indices.txt"));
    CHECK(indices == report.at("purchase").get<std::vector<std::size_t>>());

    // The emitted config reproduces the run.
    const std::string c = (w.root / "c").string();
    fs::create_directories(c);
    fs::copy(fs::path(a) / "model.sfmt", fs::path(c) / "model.sfmt");
    fs::copy(fs::path(a) / "dataset.sfds", fs::path(c) / "dataset.sfds");
    fs::copy(fs::path(a) / "mlp", fs::path(c) / "mlp", fs::copy_options::recursive);
    write_text((w.root / "emitted.ini").string(), slurp(fs::path(a) / "config.ini"));
    REQUIRE(cli({"--config", (w.root / "emitted.ini").string(), "--out", c, "select"}) == 0);
    CHECK(slurp(fs::path(c) / "report.json") == slurp(fs::path(a) / "report.json"));
    CHECK(cli({"--config", w.config(), "--out", a, "report"}) == 0);
  }

  TEST_CASE("bench needs no generated files") {
    Workdir w("bench");
    const std::string out = (w.root / "o").string();
    REQUIRE(cli({"--config", w.config(), "--out", out, "bench"}) == 0);
    CHECK(fs::exists(fs::path(out) / "bench.txt"));
    const auto j = nlohmann::json::parse(slurp(fs::path(out) / "bench.json"));
    CHECK_FALSE(j.empty());
  }

  TEST_CASE("failures map to exit codes") {
    Workdir w("codes");
    const std::string out = (w.root / "o").string();
    std::string err;
    CHECK(cli({"--bogus", "gen"}) == exit_code(ErrorCategory::kConfig));
    CHECK(cli({"--variant", "Q", "gen"}) == exit_code(ErrorCategory::kConfig));
    CHECK(cli({}) == exit_code(ErrorCategory::kConfig));
    CHECK(cli({"--config", (w.root / "absent.ini").string(), "gen"}, &err) == exit_code(ErrorCategory::kIo));
    CHECK(err.rfind("psel: ", 0) == 0);
    CHECK(cli({"--config", w.config(), "--out", out, "select"}) == exit_code(ErrorCategory::kIo));
    CHECK(cli({"--config", w.config(), "--out", out, "report"}) == exit_code(ErrorCategory::kIo));
    write_text((w.root / "bad.ini").string(), "[model]\nheads = 3\n");
    CHECK(cli({"--config", (w.root / "bad.ini").string(), "--out", out, "gen"}) == exit_code(ErrorCategory::kConfig));
    write_text((w.root / "typo.ini").string(), "[model]\nhead = 2\n");
    CHECK(cli({"--config", (w.root / "typo.ini").string(), "gen"}) == exit_code(ErrorCategory::kConfig));
  }

  TEST_CASE("select without trained MLPs still runs the baseline") {
    Workdir w("baseline");
    const std::string out = (w.root / "o").string();
    REQUIRE(cli({"--config", w.config(), "--out", out, "gen"}) == 0);
    CHECK(cli({"--config", w.config(), "--out", out, "--variant", "P", "select"}) == 0);
    const auto report = nlohmann::json::parse(slurp(fs::path(out) / "report.json"));
    CHECK(report.at("variant") == "P");
    CHECK(report.at("phases").size() == 1);
  }
}

}  // namespace
}  // namespace psel
