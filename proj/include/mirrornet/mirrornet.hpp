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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mirrornet/config.hpp"
#include "mirrornet/data.hpp"
#include "mirrornet/network.hpp"
#include "mirrornet/oracle.hpp"
#include "mirrornet/synth.hpp"
#include "mirrornet/wav.hpp"

namespace mirrornet {

// The frozen articulatory-to-acoustic plant g. Takes 9 x k trajectories in
// file units and returns spec_channels x (k * 5 / 4) compressed spectrograms.
// Nothing is differentiated through it.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual Tensor<float> synthesize(const Tensor<float>& traj) const = 0;
  // Digest of everything that determines the plant's output.
  virtual std::string fingerprint() const = 0;
  virtual std::string name() const = 0;
};

class OraclePlant final : public Plant {
 public:
  explicit OraclePlant(data::OracleParams params = {}) : params_(std::move(params)) {}
  Tensor<float> synthesize(const Tensor<float>& traj) const override;
  std::string fingerprint() const override;
  std::string name() const override { return "oracle"; }
  // Trajectory values clamped into the oracle's range so far.
  std::size_t clamped() const { return clamped_.load(); }

 private:
  data::OracleParams params_;
  mutable std::atomic<std::size_t> clamped_{0};
};

// A trained synthesizer; 6-channel models read the leading six rows.
class SynthPlant final : public Plant {
 public:
  explicit SynthPlant(synth::SynthModel model) : model_(std::move(model)) {}
  Tensor<float> synthesize(const Tensor<float>& traj) const override;
  std::string fingerprint() const override;
  std::string name() const override;
  const synth::SynthModel& model() const { return model_; }

 private:
  synth::SynthModel model_;
};

// Encoder phi and decoder f. The latent is the z-scored trajectory under
// `stats`; infer_articulation maps it back to file units.
struct MirrorNetModel {
  ArchConfig arch;
  data::ChannelStats stats;
  Encoder<float> encoder;
  Decoder<float> decoder;

  MirrorNetModel() = default;
  MirrorNetModel(const ArchConfig& arch, data::ChannelStats stats, std::uint64_t seed);

  nn::ParamList<float> encoder_parameters() { return encoder.parameters(); }
  nn::ParamList<float> decoder_parameters() { return decoder.parameters(); }
  // Encoder parameters followed by decoder parameters.
  nn::ParamList<float> parameters();
};

// spec_channels x L (L a multiple of 5) -> latent x (L * 4 / 5), normalized.
Tensor<float> encode(const MirrorNetModel& model, const Tensor<float>& spec);
// latent x k (k a multiple of 4) -> spec_channels x (k * 5 / 4).
Tensor<float> decode(const MirrorNetModel& model, const Tensor<float>& latent);

// Encoded and de-normalized to file units (pitch in Hz).
Tensor<float> infer_articulation(const MirrorNetModel& model, const Tensor<float>& spec);
// Analyses the waveform first; trailing frames beyond a multiple of 5 are
// dropped.
Tensor<float> infer_articulation(const MirrorNetModel& model, const audio::Wav& wav,
                                 const audio::AudSpecConfig& cfg = {});

// Latent statistics for a new model: fit on the supervised items when there
// are any, else taken from a synthesizer plant, else the nominal ones.
data::ChannelStats latent_stats(std::span<const data::Utterance> supervised, const Plant* plant,
                                std::size_t latent_channels);

// --- Initialization phase ----------------------------------------------------

struct InitEpochLog {
  std::size_t epoch = 0;
  double e_c = 0.0;  // MSE(l, phi(x)) on the supervised items
  double e_d = 0.0;  // MSE(x, f(l))
  double dev_e_c = 0.0;
  double dev_e_d = 0.0;
  double lr_enc = 0.0;
  double lr_dec = 0.0;
};

struct InitPhaseOptions {
  double lr = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch = 16;
  double decay = 0.5;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::function<void(const InitEpochLog&)> on_epoch;

  static InitPhaseOptions from(const config::InitConfig& cfg, std::uint64_t seed);
};

struct InitReport {
  std::vector<InitEpochLog> history;
};

// Trains the encoder on MSE(l, phi(x)) and the decoder on MSE(x, f(l)) with
// separate optimizers; neither loss reaches the other network's parameters.
// With dev items, each network keeps its best-dev weights and the schedulers
// monitor dev losses; otherwise they monitor the training losses.
InitReport init_phase(MirrorNetModel& model, std::span<const data::Utterance> supervised,
                      std::span<const data::Utterance> dev, const InitPhaseOptions& opts);

// --- Learning phase ----------------------------------------------------------

enum class Stage { kDecoder, kEncoder };
std::string_view stage_name(Stage s);

struct StageLog {
  std::size_t iteration = 0;
  Stage stage = Stage::kDecoder;
  std::size_t epoch = 0;
  double e_c = 0.0;  // MSE(x_d, x_i)
  double e_d = 0.0;  // MSE(x_s, x_d)
  double lr = 0.0;   // learning rate of the network trained in this stage
};

nlohmann::json to_json(const StageLog& log);

struct LearningPhaseOptions {
  double lr_enc = 1e-6;
  double lr_dec = 1e-6;
  std::size_t decoder_epochs = 5;
  std::size_t encoder_epochs = 5;
  std::size_t iterations = 5;
  std::size_t batch = 16;
  double decay = 0.5;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  std::function<void(const StageLog&)> on_epoch;
  // Called before (done = false) and after (done = true) every stage.
  std::function<void(std::size_t iteration, Stage stage, bool done)> on_stage;

  static LearningPhaseOptions from(const config::LearnConfig& cfg, std::uint64_t seed);
};

struct LearningReport {
  std::vector<StageLog> history;
  std::string plant_before;
  std::string plant_after;
};

// Alternates, per iteration, a decoder stage (E_d epochs on
// e_d = MSE(g(l^), f(l^)) with l^ = phi(x) held fixed) and an encoder stage
// (E_e epochs on e_c = MSE(f(phi(x)), x) with the decoder's parameters
// frozen but passing gradients). Only spectrograms are used. Throws
// ShapeError when the plant's output does not match the items and
// NonFiniteGradient on a non-finite loss.
LearningReport learning_phase(MirrorNetModel& model, std::span<const data::Utterance> items,
                              const Plant& plant, const LearningPhaseOptions& opts);

// --- Checkpoints -------------------------------------------------------------

void save_mirrornet(const std::filesystem::path& path, MirrorNetModel& model,
                    const nlohmann::json& metrics, const std::string& config_hash,
                    std::uint64_t seed);
MirrorNetModel load_mirrornet(const std::filesystem::path& path);

}  // namespace mirrornet
