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

#include "mcforge/autodiff.hpp"
#include "mcforge/corpus.hpp"
#include "mcforge/mcmodels.hpp"

namespace mcforge {

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  std::size_t step = 0;
  double dev_accuracy = 0.0;
  ad::ParamStore<float> params;
};

/// Magic, a JSON header (config, vocabulary, step, dev metric, tensor names
/// and shapes), then every tensor as little-endian float32 in header order.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const Vocabulary& vocab, const ad::ParamStore<float>& params,
                     std::size_t step, double dev_accuracy);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mcforge
