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

#include "mirrornet/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include <spdlog/spdlog.h>

#include "mirrornet/random.hpp"
#include "mirrornet/wav.hpp"

namespace mirrornet::data {
namespace {

constexpr double kGateLoHz = 40.0;
constexpr double kGateHiHz = 60.0;
// Harmonics further than this from a channel center (ln units) are skipped.
constexpr double kHarmonicReach = 7.0 * audio::kRelativeBandwidth;

double smoothstep(double lo, double hi, double x) {
  const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double log_lerp(double lo, double hi, double v) {
  return lo * std::pow(hi / lo, 0.5 * (v + 1.0));
}

double clamp_finite(double v, double lo, double hi) {
  return std::isfinite(v) ? std::clamp(v, lo, hi) : lo;
}

struct Envelope {
  double center[3];
  double gain[3];
  double width[3];
  double base;

  double operator()(double f_hz) const {
    double e = base;
    const double lf = std::log(f_hz);
    for (int j = 0; j < 3; ++j) {
      const double z = (lf - std::log(center[j])) / width[j];
      e += gain[j] * std::exp(-0.5 * z * z);
    }
    return e;
  }
};

// Windowed-sinc low-pass (Hann window), unit DC gain.
std::vector<double> lowpass_taps(double cutoff_hz, double rate_hz, std::size_t half) {
  const double fc = cutoff_hz / rate_hz;
  std::vector<double> taps(2 * half + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double n = static_cast<double>(i) - static_cast<double>(half);
    const double sinc = n == 0.0 ? 2.0 * fc
                                 : std::sin(2.0 * std::numbers::pi * fc * n) / (std::numbers::pi * n);
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(taps.size() - 1));
    taps[i] = sinc * w;
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Low-passed white noise of length k, zero mean, peak magnitude 1.
std::vector<double> smooth_noise(Rng& rng, std::size_t k, double cutoff_hz) {
  const auto taps = lowpass_taps(cutoff_hz, kTrajectoryRate, 24);
  const std::size_t half = taps.size() / 2;
  std::vector<double> noise(k + 2 * half);
  for (double& v : noise) v = rng.normal();
  std::vector<double> out(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t i = 0; i < taps.size(); ++i) out[t] += taps[i] * noise[t + i];
  }
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(k);
  double peak = 0.0;
  for (double& v : out) {
    v -= mean;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0) {
    for (double& v : out) v /= peak;
  }
  return out;
}

double max_step(const std::vector<double>& x) {
  double m = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) m = std::max(m, std::abs(x[t] - x[t - 1]));
  return m;
}

}  // namespace

audio::AuditorySpectrogram oracle_synth(const OracleParams& params, const Tensor<float>& traj,
                                        OracleDiagnostics* diag) {
  if (traj.rank() != 2 || traj.rows() != kNumChannels) {
    throw ShapeError("oracle_synth: expected 9 x k trajectory, got " + shape_str(traj.shape()));
  }
  const std::size_t k = traj.cols();
  if (k % 4 != 0) {
    throw ShapeError("oracle_synth: trajectory length " + std::to_string(k) +
                     " is not a multiple of 4");
  }
  const audio::Filterbank fb(params.audspec);
  const auto& centers = fb.center_freqs();
  const std::size_t channels = fb.channels();
  const double log_fmin = std::log(centers.front());
  const double log_step = (std::log(centers.back()) - log_fmin) / static_cast<double>(channels - 1);
  const std::size_t frames = k * 5 / 4;

  audio::AuditorySpectrogram out;
  out.values = Tensor<float>(Shape{channels, frames});
  out.frame_rate = params.audspec.frame_rate;
  out.channel_freqs = centers;

  // Valid range of a channel: TVs [-1, 1], ap/per [0, 1], pitch [0, 400] Hz.
  const auto range = [](std::size_t c) {
    if (c < kNumTVs) return std::pair{-1.0, 1.0};
    return c == kPitchChannel ? std::pair{0.0, 400.0} : std::pair{0.0, 1.0};
  };
  std::size_t clamped = 0;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto [lo, hi] = range(c);
    for (const float v : traj.row(c)) {
      if (!(v >= lo && v <= hi)) ++clamped;
    }
  }
  std::vector<double> frame(channels);
  for (std::size_t j = 0; j < frames; ++j) {
    const double u = static_cast<double>(j) * kTrajectoryRate / params.audspec.frame_rate;
    const std::size_t i0 = std::min(static_cast<std::size_t>(u), k - 1);
    const std::size_t i1 = std::min(i0 + 1, k - 1);
    const double w = std::min(u - static_cast<double>(i0), 1.0);
    double ch[kNumChannels];
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const auto [lo, hi] = range(c);
      ch[c] = clamp_finite((1.0 - w) * traj.at(c, i0) + w * traj.at(c, i1), lo, hi);
    }
    const double ap = ch[kApChannel], per = ch[kPerChannel], pitch = ch[kPitchChannel];
    const double la = ch[0], lp = ch[1], tbcl = ch[2], tbcd = ch[3], ttcl = ch[4], ttcd = ch[5];

    const Envelope env{
        {log_lerp(params.f1_lo, params.f1_hi, la), log_lerp(params.f2_lo, params.f2_hi, tbcd),
         log_lerp(params.f3_lo, params.f3_hi, ttcd)},
        {params.f1_gain * std::exp(params.modulation * lp), params.f2_gain,
         params.f3_gain * std::exp(params.modulation * ttcl)},
        {params.f1_width, params.f2_width * std::exp(params.modulation * tbcl), params.f3_width},
        params.base};

    for (std::size_t c = 0; c < channels; ++c) {
      frame[c] = params.floor + ap * params.noise * env(centers[c]);
    }
    const double voiced = per * smoothstep(kGateLoHz, kGateHiHz, pitch);
    if (voiced > 0.0) {
      const double f0 = std::max(pitch, kGateLoHz);
      const double f_top = centers.back() * std::exp(kHarmonicReach);
      for (int h = 1; h * f0 <= f_top; ++h) {
        const double fh = h * f0;
        const double amp = voiced * params.harmonic_level * std::pow(h, -params.rolloff) * env(fh);
        const double pos = (std::log(fh) - log_fmin) / log_step;
        const double reach = kHarmonicReach / log_step;
        const auto lo = static_cast<std::ptrdiff_t>(std::ceil(pos - reach));
        const auto hi = static_cast<std::ptrdiff_t>(std::floor(pos + reach));
        for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(lo, 0);
             c <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(channels) - 1); ++c) {
          frame[static_cast<std::size_t>(c)] += amp * fb.response(static_cast<std::size_t>(c), fh);
        }
      }
    }
    for (std::size_t c = 0; c < channels; ++c) {
      out.values.at(c, j) = static_cast<float>(audio::compress(frame[c]));
    }
  }
  if (diag) {
    diag->clamped += clamped;
  } else if (clamped > 0) {
    spdlog::warn("oracle_synth: clamped {} out-of-range trajectory values", clamped);
  }
  return out;
}

std::vector<Utterance> gen_synthetic(std::size_t n_items, double duration_s, std::uint64_t seed,
                                     const SyntheticOptions& opts) {
  if (n_items == 0) throw std::invalid_argument("gen_synthetic: n_items must be at least 1");
  if (opts.items_per_speaker == 0) {
    throw std::invalid_argument("gen_synthetic: items_per_speaker must be at least 1");
  }
  const auto k = static_cast<std::size_t>(4 * std::llround(25.0 * duration_s));
  if (k == 0) throw std::invalid_argument("gen_synthetic: duration too short");

  constexpr double kCutoffHz = 8.0;
  // 0.2 of the [-1, 1] TV range.
  constexpr double kMaxTvStep = 0.4;
  constexpr double kPerLo = 0.1, kPerHi = 0.9;
  constexpr std::size_t kRamp = 5;

  Rng rng(seed);
  std::vector<Utterance> items;
  items.reserve(n_items);
  for (std::size_t n = 0; n < n_items; ++n) {
    Tensor<float> traj(Shape{kNumChannels, k});
    for (std::size_t c = 0; c < kNumTVs; ++c) {
      auto x = smooth_noise(rng, k, kCutoffHz);
      double amp = rng.uniform(0.5, 0.9);
      const double step = max_step(x) * amp;
      if (step > kMaxTvStep) amp *= kMaxTvStep / step;
      for (std::size_t t = 0; t < k; ++t) traj.at(c, t) = static_cast<float>(amp * x[t]);
    }

    // Alternating voiced / unvoiced spans; periodicity ramps into each span.
    bool voiced = rng.uniform() < 0.5;
    double per = voiced ? kPerHi : kPerLo;
    std::size_t t = 0;
    while (t < k) {
      const std::size_t len = voiced ? 30 + rng.below(51) : 10 + rng.below(21);
      const double target = voiced ? kPerHi : kPerLo;
      const double start = per;
      for (std::size_t i = 0; i < len && t < k; ++i, ++t) {
        per = i < kRamp ? start + (target - start) * static_cast<double>(i + 1) / kRamp : target;
        traj.at(kPerChannel, t) = static_cast<float>(per);
        traj.at(kApChannel, t) = static_cast<float>(1.0 - per);
      }
      voiced = !voiced;
    }

    const double base = rng.uniform(100.0, 220.0);
    const double swing = rng.uniform(20.0, 60.0);
    const auto contour = smooth_noise(rng, k, 2.0);
    for (std::size_t i = 0; i < k; ++i) {
      const bool on = traj.at(kPerChannel, i) >= audio::kVoicingThreshold;
      const double f0 = std::clamp(base + swing * contour[i], 80.0, 300.0);
      traj.at(kPitchChannel, i) = on ? static_cast<float>(f0) : 0.0f;
    }

    char id[32], speaker[32];
    std::snprintf(id, sizeof id, "syn%05zu", n);
    std::snprintf(speaker, sizeof speaker, "spk%03zu", n / opts.items_per_speaker);
    Utterance u{id, speaker, Split::kTrain, oracle_synth(opts.oracle, traj).values,
                std::move(traj)};
    items.push_back(std::move(u));
  }
  return items;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<Utterance>& items,
                                    const WriteOptions& opts) {
  std::vector<UtteranceItem> manifest;
  manifest.reserve(items.size());
  for (std::size_t n = 0; n < items.size(); ++n) {
    const auto& u = items[n];
    UtteranceItem item{u.id, u.speaker, std::nullopt, std::nullopt, std::nullopt, u.split};
    if (u.trajectory) {
      item.trajectory = dir / "traj" / (u.id + ".csv");
      write_trajectory_csv(*item.trajectory, *u.trajectory);
    }
    item.spectrogram = dir / "spec" / (u.id + ".csv");
    write_spectrogram_csv(*item.spectrogram, u.spectrogram);
    if (opts.audio) {
      audio::AuditorySpectrogram spec{u.spectrogram, audio::AudSpecConfig{}.frame_rate, {}};
      const auto inv = audio::invert_spectrogram(spec, opts.inversion_iters, n);
      item.wav = dir / "wav" / (u.id + ".wav");
      std::filesystem::create_directories(item.wav->parent_path());
      audio::write_wav(*item.wav, {audio::kSampleRate, inv.wav});
    }
    manifest.push_back(std::move(item));
  }
  const auto path = dir / "manifest.json";
  save_manifest(path, manifest);
  return path;
}

}  // namespace mirrornet::data
