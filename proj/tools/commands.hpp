/* Copyright 2026 The MirrorNet Authors. All Rights Reserved.

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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "mirrornet/config.hpp"
#include "mirrornet/eval.hpp"

namespace mirrornet::cli {

namespace fs = std::filesystem;

// Bad flags or arguments; the process exits with status 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GenSyntheticArgs {
  std::size_t n = 0;
  double duration = 2.0;
  std::uint64_t seed = 0;
  fs::path out;
  std::size_t items_per_speaker = 1;
  std::string splits;  // empty: every item in train
  bool audio = false;
  int inversion_iters = 32;
};

struct TrainSynthArgs {
  config::RunConfig config;
  fs::path manifest;
  std::string variant = "ft";
  fs::path out;
  std::size_t channels = 9;
  std::size_t max_steps = 0;
};

struct TrainMirrorNetArgs {
  config::RunConfig config;
  fs::path manifest;
  std::string synth = "oracle";  // checkpoint path or "oracle"
  bool init = true;
  fs::path out;
  fs::path log;  // JSON lines; empty: <out>.log.jsonl
};

struct EvalArgs {
  fs::path model;
  fs::path estimates;  // directory of <id>.csv trajectories, instead of a model
  fs::path manifest;
  fs::path report_dir;
  std::string split = "test";
  std::string label = "mirrornet";
};

struct InvertArgs {
  fs::path model;
  fs::path wav;
  fs::path out_csv;
};

struct SynthAudioArgs {
  std::string synth = "oracle";
  fs::path traj;
  fs::path out_wav;
  int iters = 100;
  std::uint64_t seed = 0;
};

struct PaperStudyArgs {
  config::RunConfig config;
  fs::path out;
  std::size_t train_items = 64;
  std::size_t init_items = 8;
  std::size_t dev_items = 8;
  std::size_t test_items = 8;
  double duration = 2.0;
};

void gen_synthetic(const GenSyntheticArgs& args);
void train_synth(const TrainSynthArgs& args);
void train_mirrornet(const TrainMirrorNetArgs& args);
eval::PpmcReport evaluate(const EvalArgs& args);
void invert(const InvertArgs& args);
void synth_audio(const SynthAudioArgs& args);
void paper_study(const PaperStudyArgs& args);

}  // namespace mirrornet::cli
