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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mcforge/mccreate.hpp"
#include "mcforge/mcmodels.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/synth.hpp"
#include "mcforge/training.hpp"

namespace mcforge::cli {

using Json = nlohmann::ordered_json;

/// Built-in settings: "desk" (small corpus, fast models) or "paper".
Json preset(std::string_view name);

/// Merges `patch` into `base` key by key; objects merge recursively, every
/// other value replaces. Unknown keys are rejected.
void merge_config(Json& base, const Json& patch, const std::string& where = "");

/// Applies "section.key=value"; the value is parsed as JSON when it can be,
/// otherwise taken as a string.
void apply_override(Json& cfg, std::string_view assignment);

Json load_config_file(const std::filesystem::path& path);

/// Typed views of the effective configuration. The global seed feeds every
/// component; each derives its own named streams from it.
SynthConfig synth_config(const Json& cfg);
PvConfig pv_config(const Json& cfg);
McCreateConfig mccreate_config(const Json& cfg);
ModelConfig model_config(const Json& cfg, ModelKind kind);
TrainConfig train_config(const Json& cfg);
std::uint64_t global_seed(const Json& cfg);
std::size_t workers(const Json& cfg);
bool deterministic(const Json& cfg);

}  // namespace mcforge::cli
