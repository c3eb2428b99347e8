// Copyright 2026 The mcforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cli_app.hpp"
#include "cli_config.hpp"
#include "mcforge/error.hpp"

using namespace mcforge;
using namespace mcforge::cli;
namespace fs = std::filesystem;

namespace {

struct Captured {
  int code = 0;
  std::string out;
  std::string err;
};

// Runs the CLI in-process with stdout/stderr captured.
Captured invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mcforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Captured c;
  c.code = run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  c.out = out.str();
  c.err = err.str();
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "mcforge_test_cli";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("every option is documented and listed in help") {
  Context ctx;
  auto app = build_app(ctx);
  std::vector<CLI::App*> apps{app.get()};
  for (CLI::App* sub : app->get_subcommands({})) apps.push_back(sub);
  CHECK(apps.size() == 13);
  for (CLI::App* a : apps) {
    CAPTURE(a->get_name());
    CHECK(!a->get_description().empty());
    const std::string help = a->help();
    for (const CLI::Option* opt : a->get_options()) {
      CAPTURE(opt->get_name());
      CHECK(!opt->get_description().empty());
      for (const std::string& l : opt->get_lnames()) CHECK(help.find("--" + l) != std::string::npos);
      if (opt->get_lnames().empty() && opt->get_snames().empty()) {
        CHECK(help.find(opt->get_name()) != std::string::npos);
      }
    }
  }
}

TEST_CASE("config layers: preset < file < --set < flags") {
  const Json desk = preset("desk");
  const Json paper = preset("paper");
  CHECK(desk["pv"]["dim"] == 64);
  CHECK(paper["pv"]["dim"] == 256);
  CHECK(paper["model"]["embed_dim"] == 512);
  CHECK_THROWS_AS(preset("huge"), InvalidArgument);

  Json cfg = desk;
  merge_config(cfg, Json::parse(R"({"pv": {"epochs": 7}, "seed": 9})"));
  CHECK(cfg["pv"]["epochs"] == 7);
  CHECK(cfg["pv"]["dim"] == 64);
  CHECK(global_seed(cfg) == 9);
  CHECK_THROWS_AS(merge_config(cfg, Json::parse(R"({"pv": {"epoch": 7}})")), InvalidArgument);
  apply_override(cfg, "mccreate.lambda_s=0.5");
  CHECK(mccreate_config(cfg).lambda_s == 0.5);
  CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), InvalidArgument);
  CHECK_THROWS_AS(apply_override(cfg, "train.nope=1"), InvalidArgument);

  TempDir dir;
  {
    std::ofstream f(dir / "c.json");
    f << R"({"pv": {"dim": 40, "epochs": 3}, "train": {"steps": 11}})";
  }
  const auto shown = invoke({"--log-file", dir / "log", "-c", dir / "c.json", "--set", "pv.epochs=5",
                             "show-config"});
  REQUIRE(shown.code == 0);
  const Json eff = Json::parse(shown.out);
  CHECK(eff["pv"]["dim"] == 40);
  CHECK(eff["pv"]["epochs"] == 5);
  CHECK(eff["train"]["steps"] == 11);
  CHECK(eff["mccreate"]["N"] == desk["mccreate"]["N"]);

  const auto flags = invoke({"--log-file", dir / "log", "--preset", "paper", "--seed", "42", "-j", "3",
                             "show-config"});
  REQUIRE(flags.code == 0);
  const Json p = Json::parse(flags.out);
  CHECK(p["seed"] == 42);
  CHECK(p["workers"] == 3);
  CHECK(p["pv"]["dim"] == 256);
}

TEST_CASE("exit codes") {
  TempDir dir;
  const std::string log = dir / "log";
  CHECK(invoke({"--log-file", log, "show-config"}).code == 0);
  CHECK(invoke({"--log-file", log}).code == 1);
  CHECK(invoke({"--log-file", log, "frobnicate"}).code == 1);
  CHECK(invoke({"--log-file", log, "stats", "--dataset", dir / "missing.jsonl"}).code == 1);
  const auto bad_set = invoke({"--log-file", log, "--set", "pv.bogus=1", "show-config"});
  CHECK(bad_set.code == 1);
  CHECK(bad_set.err.find("mcforge show-config: error:") != std::string::npos);
  {
    std::ofstream f(dir / "bad.jsonl");
    f << "{\"id\": \n";
  }
  const auto corrupt = invoke({"--log-file", log, "stats", "--dataset", dir / "bad.jsonl"});
  CHECK(corrupt.code != 0);
  CHECK(corrupt.err.find("(log: ") != std::string::npos);
  const auto unwritable = invoke({"--log-file", log, "synth-corpus", "--docs", "10", "-o",
                                  dir / "no/such/dir/corpus.jsonl"});
  CHECK(unwritable.code == 2);
  CHECK(invoke({"--log-file", log, "--help"}).code == 0);
}

TEST_CASE("pipeline reruns are byte-identical and record provenance") {
  TempDir dir;
  const std::string log = dir / "log";
  const std::vector<std::string> base{"--log-file", log, "-q", "--set", "synth.docs=400"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a);
  };
  REQUIRE(with({"synth-corpus", "-o", dir / "c1.jsonl"}).code == 0);
  REQUIRE(with({"synth-corpus", "-o", dir / "c2.jsonl"}).code == 0);
  CHECK(slurp(dir / "c1.jsonl") == slurp(dir / "c2.jsonl"));

  REQUIRE(with({"train-pv", "--corpus", dir / "c1.jsonl", "-o", dir / "pv1.bin", "--epochs", "3",
                "--dim", "16"}).code == 0);
  REQUIRE(with({"-j", "3", "train-pv", "--corpus", dir / "c1.jsonl", "-o", dir / "pv2.bin",
                "--epochs", "3", "--dim", "16"}).code == 0);
  CHECK(slurp(dir / "pv1.bin") == slurp(dir / "pv2.bin"));

  REQUIRE(with({"build-dataset", "--corpus", dir / "c1.jsonl", "--pv", dir / "pv1.bin", "-o",
                dir / "d1.jsonl"}).code == 0);
  REQUIRE(with({"-j", "2", "build-dataset", "--corpus", dir / "c1.jsonl", "--pv", dir / "pv1.bin",
                "-o", dir / "d2.jsonl"}).code == 0);
  CHECK(slurp(dir / "d1.jsonl") == slurp(dir / "d2.jsonl"));

  const Json prov = Json::parse(slurp(dir / "d1.jsonl.run.json"));
  CHECK(prov["command"] == "build-dataset");
  CHECK(prov.contains("config_hash"));
  CHECK(prov["inputs"].size() == 2);
  CHECK(prov.contains("output"));

  const auto stats = with({"stats", "--dataset", dir / "d1.jsonl"});
  CHECK(stats.code == 0);
  CHECK(stats.out.find("#Instances") != std::string::npos);
}

TEST_CASE("checked-in config files match the presets") {
  for (const char* name : {"desk", "paper"}) {
    CAPTURE(name);
    const fs::path p = fs::path(MCFORGE_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
    REQUIRE(fs::exists(p));
    CHECK(load_config_file(p) == preset(name));
  }
}
