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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirrornet/audfront.hpp"
#include "mirrornet/tensor.hpp"

namespace mirrornet::data {

namespace fs = std::filesystem;

// Six tract variables followed by the three source features.
inline constexpr std::array<std::string_view, 9> kChannelNames{
    "LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "ap", "per", "pitch"};
inline constexpr std::size_t kNumChannels = 9;
inline constexpr std::size_t kNumTVs = 6;
inline constexpr std::size_t kApChannel = 6;
inline constexpr std::size_t kPerChannel = 7;
inline constexpr std::size_t kPitchChannel = 8;
inline constexpr double kTrajectoryRate = 100.0;
// Pitch enters the models as Hz / 400; files keep Hz.
inline constexpr double kPitchScale = 400.0;
inline constexpr double kStdFloor = 1e-8;

enum class Split { kTrain, kDev, kTest, kInit };

std::string_view split_name(Split s);
// Throws std::invalid_argument for unknown names.
Split parse_split(std::string_view name);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- Files -----------------------------------------------------------------

// Header: time_s,LA,LP,TBCL,TBCD,TTCL,TTCD,ap,per,pitch_hz; 100 rows per
// second. Returns a 9 x k tensor in file units (pitch in Hz).
Tensor<float> read_trajectory_csv(const fs::path& path);
void write_trajectory_csv(const fs::path& path, const Tensor<float>& traj);

// One row per frame, one column per channel, 6 significant digits, no header.
// Returns channels x frames.
Tensor<float> read_spectrogram_csv(const fs::path& path);
void write_spectrogram_csv(const fs::path& path, const Tensor<float>& spec);

// --- Manifest --------------------------------------------------------------

struct UtteranceItem {
  std::string id;
  std::string speaker;
  std::optional<fs::path> wav;
  std::optional<fs::path> trajectory;
  // Precomputed auditory spectrogram (CSV); used instead of analysing `wav`.
  std::optional<fs::path> spectrogram;
  Split split = Split::kTrain;
};

// JSON array of {id, speaker, wav?, trajectory?, spectrogram?, split}.
// Relative paths resolve against the manifest's directory. Every item is
// validated (files present, trajectory schema and rate, audio/trajectory
// duration within 20 ms); all violations are reported together in one
// DataError, one line per item. Order follows the file.
std::vector<UtteranceItem> load_manifest(const fs::path& path);
// Paths are written relative to the manifest's directory when possible.
void save_manifest(const fs::path& path, const std::vector<UtteranceItem>& items);

// --- In-memory dataset -------------------------------------------------------

struct Utterance {
  std::string id;
  std::string speaker;
  Split split = Split::kTrain;
  Tensor<float> spectrogram;                // 128 x L, L = k * 5 / 4
  std::optional<Tensor<float>> trajectory;  // 9 x k, file units
};

// Reads spectrograms (CSV, else computed from the WAV) and trajectories, then
// crops each item from its start to a common grid: k a multiple of 4, at most
// max_latent_frames, and L = k * 5 / 4.
std::vector<Utterance> load_utterances(const std::vector<UtteranceItem>& items,
                                       std::size_t max_latent_frames = 200,
                                       const audio::AudSpecConfig& cfg = {});

std::vector<Utterance> select(const std::vector<Utterance>& all, Split split);

// --- Normalization ---------------------------------------------------------

// Per-channel z-scoring in model units (pitch / 400 for the pitch channel of
// a 9-channel trajectory). Fit on training data only.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t channels() const { return mean.size(); }

  static ChannelStats fit(std::span<const Tensor<float>> trajectories);

  template <typename T>
  Tensor<T> normalize(const Tensor<T>& traj) const;
  template <typename T>
  Tensor<T> denormalize(const Tensor<T>& normalized) const;

  bool operator==(const ChannelStats&) const = default;
};

// Reference statistics of the synthetic trajectory conventions, used when no
// supervised data is available to fit.
ChannelStats nominal_stats();

// Leading `channels` rows of a trajectory.
Tensor<float> take_channels(const Tensor<float>& traj, std::size_t channels);

// --- Splits -----------------------------------------------------------------

// Assigns whole speakers to splits. The first entry of `ratios` is the
// remainder split; every other split receives max(1, round(n * ratio))
// speakers, where n is the number of distinct speakers and ratios are
// normalized to sum to one. Speakers are shuffled with `seed` first.
// Throws DataError when some split would be left without a speaker.
std::map<std::string, Split> assign_speaker_splits(
    std::vector<std::string> speakers, const std::vector<std::pair<Split, double>>& ratios,
    std::uint64_t seed);

// assign_speaker_splits applied to the items' speakers.
std::vector<UtteranceItem> split_by_speaker(std::vector<UtteranceItem> items,
                                            const std::vector<std::pair<Split, double>>& ratios,
                                            std::uint64_t seed);

// Parses "train=0.8,dev=0.1,test=0.1".
std::vector<std::pair<Split, double>> parse_split_ratios(std::string_view text);

}  // namespace mirrornet::data
