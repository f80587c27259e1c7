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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mirrornet/tensor.hpp"

namespace mirrornet::audio {

inline constexpr int kSampleRate = 16000;
// 8 ms hop at 16 kHz gives the 125 Hz auditory frame rate.
inline constexpr std::size_t kHop = 128;
inline constexpr std::size_t kWindow = 1024;
inline constexpr std::size_t kFftSize = 4096;
inline constexpr double kCompressionEps = 1e-3;
// Filter standard deviation in natural-log frequency units.
inline constexpr double kRelativeBandwidth = 0.06;

inline constexpr std::size_t kSourceHop = 160;     // 10 ms
inline constexpr std::size_t kSourceWindow = 640;  // 40 ms
inline constexpr double kPitchMinHz = 60.0;
inline constexpr double kPitchMaxHz = 400.0;
inline constexpr double kVoicingThreshold = 0.45;

class UnsupportedAudio : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AudSpecConfig {
  std::size_t channels = 128;
  double frame_rate = 125.0;
  double fmin = 180.0;
  double fmax = 7000.0;

  void validate() const;
  bool operator==(const AudSpecConfig&) const = default;
};

// Log-spaced, constant-Q magnitude filters: Gaussians on a log-frequency
// axis with standard deviation kRelativeBandwidth (natural-log units).
class Filterbank {
 public:
  explicit Filterbank(const AudSpecConfig& cfg = {});

  std::size_t channels() const { return centers_.size(); }
  const std::vector<double>& center_freqs() const { return centers_; }
  // Unit-peak magnitude response of a channel at frequency f (Hz).
  double response(std::size_t channel, double f_hz) const;
  // Channel whose center is nearest to f on a log-frequency axis.
  std::size_t nearest_channel(double f_hz) const;

  const AudSpecConfig& config() const { return cfg_; }

 private:
  AudSpecConfig cfg_;
  std::vector<double> centers_;
};

inline double compress(double magnitude) {
  return std::log1p(magnitude / kCompressionEps);
}
inline double decompress(double value) {
  return kCompressionEps * std::expm1(value);
}

struct AuditorySpectrogram {
  Tensor<float> values;  // channels x frames, log(1 + x / eps) compressed
  double frame_rate = 125.0;
  std::vector<double> channel_freqs;

  std::size_t channels() const { return values.rows(); }
  std::size_t frames() const { return values.cols(); }
};

// Frame count for a signal of n samples: round(n / hop).
std::size_t spectrogram_frames(std::size_t samples);

// Per 8 ms frame: Hann-windowed magnitude spectrum weighted by each channel's
// Gaussian filter, then log(1 + x / eps). Deterministic.
AuditorySpectrogram auditory_spectrogram(std::span<const float> wav, int fs,
                                         const AudSpecConfig& cfg = {});

struct InversionResult {
  std::vector<float> wav;
  // Relative re-analysis error ||A(wav_i) - target|| / ||target|| after each
  // iteration (absolute when the target is all zeros).
  std::vector<double> error_trace;
};

// Iterative analysis-synthesis from seeded random phase. Each iteration
// re-analyzes the current waveform, rescales every STFT bin by the ratio of
// target to current magnitude of the channels covering it, and resynthesizes
// by least-squares overlap-add. The returned waveform is the iterate with the
// lowest re-analysis error, so error_trace is non-increasing.
InversionResult invert_spectrogram(const AuditorySpectrogram& spec, int iters,
                                   std::uint64_t seed,
                                   const AudSpecConfig& cfg = {});

struct SourceFeatures {
  std::vector<float> aperiodicity;
  std::vector<float> periodicity;
  std::vector<float> pitch_hz;

  std::size_t frames() const { return pitch_hz.size(); }
};

// Per 10 ms frame: normalized autocorrelation peak over the 60-400 Hz lag
// band gives periodicity and pitch; aperiodicity = 1 - periodicity. Frames
// below the voicing threshold get pitch 0.
SourceFeatures estimate_source_features(std::span<const float> wav, int fs);

}  // namespace mirrornet::audio
