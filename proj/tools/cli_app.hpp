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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace mcforge::cli {

struct Context {
  // global
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<bool> deterministic;
  std::vector<std::string> sets;
  std::string log_path = "mcforge.log";
  bool quiet = false;

  // command arguments, shared by the subcommands that use them
  std::string input, output, corpus, pv, dataset, base, checkpoint, metrics, log, static_dir;
  std::string host = "127.0.0.1";
  std::string variant = "pv";
  std::string model = "hybrid";
  std::string split = "dev";
  std::string pair_order;
  std::optional<std::size_t> limit, docs, steps, batch_size, eval_every, rouge_limit;
  std::optional<int> dim, epochs;
  std::optional<double> lr, lambda_gen;
  std::vector<double> lambdas;
  bool no_validate = false;
  int port = 8080;

  std::vector<std::string> argv;
  std::map<std::string, std::function<int(Context&)>> handlers;
};

/// The full command tree. Options are bound into `ctx`; nothing runs until
/// dispatch().
std::unique_ptr<CLI::App> build_app(Context& ctx);

/// Runs the command line and returns the process exit code: 0 success,
/// 1 usage or configuration error, 2 runtime failure.
int run(int argc, char** argv);

}  // namespace mcforge::cli
