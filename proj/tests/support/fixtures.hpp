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

#include "mcforge/mccreate.hpp"
#include "mcforge/pvdbow.hpp"
#include "mcforge/synth.hpp"

namespace fixtures {

// 30 documents over 3 topics.
inline const mcforge::Corpus& micro_corpus() {
  static const mcforge::Corpus c = [] {
    mcforge::SynthConfig s;
    s.docs = 30;
    s.topics = 3;
    s.seed = 5;
    return mcforge::synth_corpus(s);
  }();
  return c;
}

inline const mcforge::PvModel& micro_pv() {
  static const mcforge::PvModel m = [] {
    mcforge::PvConfig p;
    p.dim = 16;
    p.epochs = 60;
    p.min_count = 1;
    p.initial_lr = 0.05;
    return mcforge::train_pv(micro_corpus(), p);
  }();
  return m;
}

inline const mcforge::Corpus& small_corpus() {
  static const mcforge::Corpus c = [] {
    mcforge::SynthConfig s;
    s.docs = 600;
    s.topics = 20;
    s.seed = 9;
    return mcforge::synth_corpus(s);
  }();
  return c;
}

inline mcforge::PvConfig small_pv_config() {
  mcforge::PvConfig p;
  p.dim = 32;
  p.epochs = 100;
  p.min_count = 2;
  p.initial_lr = 0.05;
  return p;
}

inline const mcforge::PvModel& small_pv() {
  static const mcforge::PvModel m = mcforge::train_pv(small_corpus(), small_pv_config());
  return m;
}

inline mcforge::McCreateConfig small_mc_config() {
  mcforge::McCreateConfig mc;
  mc.neighborhood = 50;
  return mc;
}

inline const mcforge::McDataset& small_dataset() {
  static const mcforge::McDataset ds =
      mcforge::build_dataset(small_corpus(), small_pv(), small_mc_config());
  return ds;
}

}  // namespace fixtures
