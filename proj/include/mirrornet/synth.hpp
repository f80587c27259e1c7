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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mirrornet/config.hpp"
#include "mirrornet/data.hpp"
#include "mirrornet/network.hpp"

namespace mirrornet::synth {

// FT and LT share the architecture; they differ in data budget and batch size.
enum class Variant { kFT, kLT };

std::string_view variant_name(Variant v);
// Accepts "ft" / "lt" in any case; throws std::invalid_argument otherwise.
Variant parse_variant(std::string_view name);

// Decoder-shaped network from trajectories to auditory spectrograms. Inputs
// are the leading `channels()` trajectory rows in file units; they are
// z-scored with `stats` before entering the network.
struct SynthModel {
  ArchConfig arch;
  Variant variant = Variant::kFT;
  data::ChannelStats stats;
  Decoder<float> net;

  SynthModel() = default;
  // `stats.channels()` sets the input width (9 with source features, 6 without).
  SynthModel(const ArchConfig& arch, Variant variant, data::ChannelStats stats,
             std::uint64_t seed);

  std::size_t channels() const { return stats.channels(); }
  nn::ParamList<float> parameters() { return net.parameters(); }
};

// channels() x k in file units -> spec_channels x (k * 5 / 4). Deterministic.
Tensor<float> synth_forward(const SynthModel& model, const Tensor<float>& artic);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // optimizer steps taken so far
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch = 16;
  double decay = 0.5;
  std::size_t patience = 5;
  std::size_t epochs = 100;
  // Stop once this many optimizer steps were taken (0: no limit).
  std::size_t max_steps = 0;
  // Stop once the monitored loss is at or below this value (0: never).
  double stop_below = 0.0;
  std::uint64_t seed = 0;
  std::function<void(const EpochLog&)> on_epoch;

  static TrainOptions from(const config::TrainSynthConfig& cfg, Variant variant,
                           std::uint64_t seed);
};

struct TrainResult {
  SynthModel model;  // best monitored-loss weights
  std::vector<EpochLog> history;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

// Minimizes mse(g(l), x) over `train` with Adam. Each step averages the
// per-item gradients of one shuffled batch. The scheduler and the best-weights
// selection monitor the dev loss, or the train loss when `dev` is empty.
// Items need trajectories; stats are fit on `train`.
TrainResult train_synthesizer(std::span<const data::Utterance> train,
                              std::span<const data::Utterance> dev, const ArchConfig& arch,
                              Variant variant, std::size_t channels, const TrainOptions& opts);

struct EvalReport {
  double mean_mse = 0.0;
  std::vector<std::string> ids;
  std::vector<double> item_mse;
};

// Mean of per-item spectrogram MSEs.
EvalReport eval_synthesizer(const SynthModel& model, std::span<const data::Utterance> items);
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

void save_synth(const std::filesystem::path& path, SynthModel& model, const nlohmann::json& metrics,
                const std::string& config_hash, std::uint64_t seed);
SynthModel load_synth(const std::filesystem::path& path);

}  // namespace mirrornet::synth
