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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mirrornet/audfront.hpp"
#include "mirrornet/random.hpp"
#include "mirrornet/wav.hpp"
#include "test_util.hpp"

using namespace mirrornet;
using namespace mirrornet::audio;

namespace {

std::vector<float> tone(double f_hz, double seconds, double amp = 0.5) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * f_hz * i / kSampleRate));
  }
  return out;
}

// Channel with the largest time-averaged value.
std::size_t peak_channel(const AuditorySpectrogram& s) {
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t c = 0; c < s.channels(); ++c) {
    double acc = 0.0;
    for (float v : s.values.row(c)) acc += v;
    if (acc > best_v) {
      best_v = acc;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("filterbank centers are 128 log-spaced frequencies from 180 to 7000 Hz") {
  const Filterbank fb;
  const auto& f = fb.center_freqs();
  REQUIRE(f.size() == 128);
  CHECK(f.front() == doctest::Approx(180.0));
  CHECK(f.back() == doctest::Approx(7000.0));
  const double ratio = f[1] / f[0];
  for (std::size_t i = 1; i < f.size(); ++i) {
    CHECK(f[i] > f[i - 1]);
    CHECK(f[i] / f[i - 1] == doctest::Approx(ratio).epsilon(1e-9));
  }
  CHECK(fb.response(40, f[40]) == doctest::Approx(1.0));
  CHECK(fb.nearest_channel(f[17] * 1.001) == 17);
}

TEST_CASE("silence maps to an all-zero spectrogram") {
  const std::vector<float> silence(16000, 0.0f);
  const auto s = auditory_spectrogram(silence, kSampleRate);
  for (float v : s.values.data()) CHECK(v == 0.0f);
}

TEST_CASE("a 2 s input gives 250 frames and frame counts follow duration x 125") {
  CHECK(auditory_spectrogram(tone(440, 2.0), kSampleRate).values.shape() == Shape{128, 250});
  for (double d = 0.5; d <= 4.0; d += 0.37) {
    const auto n = static_cast<std::size_t>(std::lround(d * kSampleRate));
    CHECK(spectrogram_frames(n) == static_cast<std::size_t>(std::lround(d * 125.0)));
  }
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(auditory_spectrogram(tone(440, 0.5), 8000), UnsupportedAudio);
  CHECK_THROWS_AS(auditory_spectrogram(std::vector<float>{}, kSampleRate), UnsupportedAudio);
  CHECK_THROWS_AS(estimate_source_features(tone(440, 0.5), 22050), UnsupportedAudio);
}

TEST_CASE("a pure tone peaks at the channel nearest its frequency") {
  const Filterbank fb;
  for (double f : {250.0, 500.0, 1000.0, 2000.0, 4000.0}) {
    const auto s = auditory_spectrogram(tone(f, 0.5), kSampleRate);
    CHECK(peak_channel(s) == fb.nearest_channel(f));
  }
}

TEST_CASE("peak channel is monotone in frequency and invariant to amplitude") {
  Rng rng(12);
  std::size_t prev = 0;
  for (double f = 200.0; f < 6500.0; f *= 1.0 + rng.uniform(0.05, 0.3)) {
    const std::size_t peak = peak_channel(auditory_spectrogram(tone(f, 0.3), kSampleRate));
    CHECK(peak >= prev);
    prev = peak;
    for (double a : {0.01, 0.1, 0.9}) {
      CHECK(peak_channel(auditory_spectrogram(tone(f, 0.3, a), kSampleRate)) == peak);
    }
  }
}

TEST_CASE("auditory spectrogram is deterministic and nonnegative") {
  Rng rng(2);
  std::vector<float> noise(8000);
  for (auto& v : noise) v = static_cast<float>(0.1 * rng.normal());
  const auto a = auditory_spectrogram(noise, kSampleRate);
  const auto b = auditory_spectrogram(noise, kSampleRate);
  CHECK(a.values == b.values);
  for (float v : a.values.data()) CHECK(v >= 0.0f);
}

TEST_CASE("inversion error trace is non-increasing and converges on a tone") {
  const auto target = auditory_spectrogram(tone(1000.0, 0.5), kSampleRate);
  const auto r = invert_spectrogram(target, 100, 7);
  REQUIRE(r.error_trace.size() == 100);
  for (std::size_t i = 1; i < r.error_trace.size(); ++i) {
    CHECK(r.error_trace[i] <= r.error_trace[i - 1] + 1e-6);
  }
  CHECK(r.error_trace.back() < 0.1 * r.error_trace.front());
  const auto again = invert_spectrogram(target, 100, 7);
  CHECK(again.wav == r.wav);
}

TEST_CASE("inverting silence gives near-silence") {
  AuditorySpectrogram s;
  s.values = Tensor<float>(Shape{128, 50}, 0.0f);
  const auto r = invert_spectrogram(s, 5, 1);
  double ss = 0.0;
  for (float v : r.wav) ss += double(v) * v;
  CHECK(std::sqrt(ss / std::max<std::size_t>(1, r.wav.size())) < 1e-4);
}

TEST_CASE("source features of a 200 Hz sine, noise and silence") {
  const auto sine = estimate_source_features(tone(200.0, 1.0), kSampleRate);
  REQUIRE(sine.frames() > 10);
  for (std::size_t i = 2; i + 2 < sine.frames(); ++i) {
    CHECK(std::abs(sine.pitch_hz[i] - 200.0) <= 5.0);
    CHECK(sine.periodicity[i] > 0.9f);
  }

  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    std::vector<float> noise(16000);
    for (auto& v : noise) v = static_cast<float>(0.3 * rng.normal());
    const auto f = estimate_source_features(noise, kSampleRate);
    const auto low = std::count_if(f.periodicity.begin(), f.periodicity.end(),
                                   [](float p) { return p < 0.5f; });
    CHECK(static_cast<double>(low) >= 0.9 * f.frames());
    for (std::size_t i = 0; i < f.frames(); ++i) {
      CHECK(f.periodicity[i] + f.aperiodicity[i] <= 1.0f + 1e-6f);
      if (f.periodicity[i] < kVoicingThreshold) CHECK(f.pitch_hz[i] == 0.0f);
    }
  }

  const auto quiet = estimate_source_features(std::vector<float>(8000, 0.0f), kSampleRate);
  for (std::size_t i = 0; i < quiet.frames(); ++i) {
    CHECK(quiet.pitch_hz[i] == 0.0f);
    CHECK(quiet.periodicity[i] == 0.0f);
  }
}

TEST_CASE("WAV round trip and format errors") {
  const auto dir = mirrornet::testing::scratch_dir("wav");
  Wav w;
  w.samples = tone(300.0, 0.1);
  w.samples.push_back(2.0f);  // clipped to full scale
  write_wav(dir / "a.wav", w);
  const Wav back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i + 1 < w.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0f / 32767.0f);
  }
  CHECK(back.samples.back() == doctest::Approx(1.0).epsilon(1e-4));
  {
    std::ofstream junk(dir / "bad.wav", std::ios::binary);
    junk << "not a wav file at all";
  }
  CHECK_THROWS_AS(read_wav(dir / "bad.wav"), WavError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), WavError);
}
