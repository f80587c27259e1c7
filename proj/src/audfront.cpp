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

#include "mirrornet/audfront.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

#include "mirrornet/random.hpp"

namespace mirrornet::audio {
namespace {

using cplx = std::complex<double>;
constexpr std::size_t kBins = kFftSize / 2 + 1;
// Keeps magnitude ratios finite where target or estimate is silent.
constexpr double kRatioFloor = 1e-7;
// Fast Griffin-Lim style extrapolation of successive projections.
constexpr double kMomentum = 0.9;

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft {
 public:
  Fft() {
    real_ = fftw_alloc_real(kFftSize);
    spec_ = fftw_alloc_complex(kBins);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(kFftSize), spec_, real_, FFTW_ESTIMATE);
  }
  ~Fft() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  double* real() { return real_; }
  cplx* spec() { return reinterpret_cast<cplx*>(spec_); }
  void forward() { fftw_execute(forward_); }
  void inverse() { fftw_execute(inverse_); }

 private:
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

struct SparseFilter {
  std::size_t first_bin = 0;
  std::vector<double> weights;
};

// Frame t is centered on sample t * hop + hop / 2.
std::ptrdiff_t frame_start(std::size_t t) {
  return static_cast<std::ptrdiff_t>(t * kHop + kHop / 2) -
         static_cast<std::ptrdiff_t>(kWindow / 2);
}

class Analyzer {
 public:
  explicit Analyzer(const Filterbank& fb) : window_(kWindow) {
    for (std::size_t j = 0; j < kWindow; ++j) {
      window_[j] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j) /
                                        static_cast<double>(kWindow));
    }
    // Scale so a sinusoid of amplitude a puts total mass a on the bins around it.
    std::fill(fft_.real(), fft_.real() + kFftSize, 0.0);
    std::copy(window_.begin(), window_.end(), fft_.real());
    fft_.forward();
    double total = std::abs(fft_.spec()[0]);
    for (std::size_t b = 1; b < kBins - 1; ++b) total += 2.0 * std::abs(fft_.spec()[b]);
    total += std::abs(fft_.spec()[kBins - 1]);
    scale_ = 2.0 / total;

    const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(kFftSize);
    filters_.resize(fb.channels());
    for (std::size_t c = 0; c < fb.channels(); ++c) {
      const double fc = fb.center_freqs()[c];
      const double span = 4.0 * kRelativeBandwidth;
      const auto lo = static_cast<std::size_t>(std::ceil(fc * std::exp(-span) / bin_hz));
      const auto hi = std::min(kBins - 1, static_cast<std::size_t>(std::floor(fc * std::exp(span) / bin_hz)));
      filters_[c].first_bin = lo;
      for (std::size_t b = lo; b <= hi; ++b) {
        filters_[c].weights.push_back(fb.response(c, static_cast<double>(b) * bin_hz));
      }
    }
  }

  std::size_t channels() const { return filters_.size(); }

  // Complex half spectra, frames x kBins.
  std::vector<cplx> stft(std::span<const double> x, std::size_t frames) {
    std::vector<cplx> out(frames * kBins);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    for (std::size_t t = 0; t < frames; ++t) {
      double* buf = fft_.real();
      std::fill(buf, buf + kFftSize, 0.0);
      const std::ptrdiff_t start = frame_start(t);
      for (std::size_t j = 0; j < kWindow; ++j) {
        const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
        if (i >= 0 && i < n) buf[j] = window_[j] * x[static_cast<std::size_t>(i)];
      }
      fft_.forward();
      std::copy(fft_.spec(), fft_.spec() + kBins, out.begin() + static_cast<std::ptrdiff_t>(t * kBins));
    }
    return out;
  }

  // Least-squares overlap-add inverse of stft().
  std::vector<double> istft(std::span<const cplx> spectra, std::size_t frames,
                            std::size_t samples) {
    std::vector<double> x(samples, 0.0), wsum(samples, 0.0);
    const auto n = static_cast<std::ptrdiff_t>(samples);
    const double inv_n = 1.0 / static_cast<double>(kFftSize);
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy(spectra.begin() + static_cast<std::ptrdiff_t>(t * kBins),
                spectra.begin() + static_cast<std::ptrdiff_t>((t + 1) * kBins), fft_.spec());
      fft_.inverse();
      const std::ptrdiff_t start = frame_start(t);
      for (std::size_t j = 0; j < kWindow; ++j) {
        const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
        if (i < 0 || i >= n) continue;
        x[static_cast<std::size_t>(i)] += window_[j] * fft_.real()[j] * inv_n;
        wsum[static_cast<std::size_t>(i)] += window_[j] * window_[j];
      }
    }
    for (std::size_t i = 0; i < samples; ++i) x[i] = wsum[i] > 1e-12 ? x[i] / wsum[i] : 0.0;
    return x;
  }

  double scale() const { return scale_; }

  // Linear channel magnitudes of one frame's scaled bin magnitudes.
  void project(std::span<const double> mags, std::span<double> out) const {
    for (std::size_t c = 0; c < filters_.size(); ++c) {
      const auto& f = filters_[c];
      double acc = 0.0;
      for (std::size_t k = 0; k < f.weights.size(); ++k) acc += f.weights[k] * mags[f.first_bin + k];
      out[c] = acc;
    }
  }

  // out += A^T v
  void back_project(std::span<const double> v, std::span<double> out) const {
    for (std::size_t c = 0; c < filters_.size(); ++c) {
      const auto& f = filters_[c];
      for (std::size_t k = 0; k < f.weights.size(); ++k) out[f.first_bin + k] += f.weights[k] * v[c];
    }
  }

  // Compressed channels x frames spectrogram of complex spectra.
  Tensor<float> compressed(std::span<const cplx> spectra, std::size_t frames) const {
    Tensor<float> out(Shape{filters_.size(), frames});
    std::vector<double> mags(kBins), ch(filters_.size());
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t b = 0; b < kBins; ++b) mags[b] = std::abs(spectra[t * kBins + b]) * scale_;
      project(mags, ch);
      for (std::size_t c = 0; c < ch.size(); ++c) out.at(c, t) = static_cast<float>(compress(ch[c]));
    }
    return out;
  }

 private:
  std::vector<double> window_;
  std::vector<SparseFilter> filters_;
  double scale_ = 1.0;
  Fft fft_;
};

void require_rate(int fs) {
  if (fs != kSampleRate) {
    throw UnsupportedAudio("unsupported sample rate " + std::to_string(fs) +
                           " Hz; expected " + std::to_string(kSampleRate));
  }
}

double relative_error(const Tensor<float>& got, const Tensor<float>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double d = static_cast<double>(got[i]) - want[i];
    num += d * d;
    den += static_cast<double>(want[i]) * want[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

void AudSpecConfig::validate() const {
  if (channels != 128) throw std::invalid_argument("audspec: channels must be 128");
  if (frame_rate != static_cast<double>(kSampleRate) / static_cast<double>(kHop)) {
    throw std::invalid_argument("audspec: frame_rate must be 125 Hz at 16 kHz");
  }
  if (!(fmin > 0.0) || !(fmax > fmin) || fmax >= kSampleRate / 2.0) {
    throw std::invalid_argument("audspec: need 0 < fmin < fmax < 8000 Hz");
  }
}

Filterbank::Filterbank(const AudSpecConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  centers_.resize(cfg_.channels);
  const double ratio = std::log(cfg_.fmax / cfg_.fmin);
  for (std::size_t c = 0; c < cfg_.channels; ++c) {
    centers_[c] = cfg_.fmin * std::exp(ratio * static_cast<double>(c) /
                                       static_cast<double>(cfg_.channels - 1));
  }
}

double Filterbank::response(std::size_t channel, double f_hz) const {
  if (f_hz <= 0.0) return 0.0;
  const double z = std::log(f_hz / centers_[channel]) / kRelativeBandwidth;
  return std::exp(-0.5 * z * z);
}

std::size_t Filterbank::nearest_channel(double f_hz) const {
  std::size_t best = 0;
  double best_d = std::abs(std::log(f_hz / centers_[0]));
  for (std::size_t c = 1; c < centers_.size(); ++c) {
    const double d = std::abs(std::log(f_hz / centers_[c]));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::size_t spectrogram_frames(std::size_t samples) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(samples) /
                                               static_cast<double>(kHop)));
}

AuditorySpectrogram auditory_spectrogram(std::span<const float> wav, int fs,
                                         const AudSpecConfig& cfg) {
  require_rate(fs);
  if (wav.empty()) throw UnsupportedAudio("auditory_spectrogram: empty signal");
  const std::size_t frames = spectrogram_frames(wav.size());
  if (frames == 0) throw UnsupportedAudio("auditory_spectrogram: shorter than one frame");
  const Filterbank fb(cfg);
  Analyzer analyzer(fb);
  const std::vector<double> x(wav.begin(), wav.end());
  const auto spectra = analyzer.stft(x, frames);
  return {analyzer.compressed(spectra, frames), cfg.frame_rate, fb.center_freqs()};
}

InversionResult invert_spectrogram(const AuditorySpectrogram& spec, int iters,
                                   std::uint64_t seed, const AudSpecConfig& cfg) {
  if (iters < 1) throw std::invalid_argument("invert_spectrogram: iters must be >= 1");
  const Filterbank fb(cfg);
  if (spec.channels() != fb.channels()) {
    throw ShapeError("invert_spectrogram: expected " + std::to_string(fb.channels()) +
                     " channels");
  }
  Analyzer analyzer(fb);
  const std::size_t frames = spec.frames();
  const std::size_t channels = fb.channels();
  const std::size_t samples = frames * kHop;

  // Initial bin magnitudes: each bin takes the filter-weighted mean of the
  // target magnitudes of the channels covering it.
  std::vector<double> target_m(channels * frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      target_m[t * channels + c] = std::max(0.0, decompress(spec.values.at(c, t)));
    }
  }
  std::vector<double> coverage(kBins, 0.0);
  analyzer.back_project(std::vector<double>(channels, 1.0), coverage);

  Rng rng(seed);
  std::vector<cplx> spectra(frames * kBins);
  {
    std::vector<double> num(kBins);
    for (std::size_t t = 0; t < frames; ++t) {
      std::fill(num.begin(), num.end(), 0.0);
      analyzer.back_project(std::span<const double>(target_m).subspan(t * channels, channels), num);
      for (std::size_t b = 0; b < kBins; ++b) {
        // DC and Nyquist stay real so the half spectrum is Hermitian-consistent.
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (b == 0 || b == kBins - 1) phase = phase < std::numbers::pi ? 0.0 : std::numbers::pi;
        const double mag = coverage[b] > 0.0 ? num[b] / coverage[b] / analyzer.scale() : 0.0;
        spectra[t * kBins + b] = std::polar(mag, phase);
      }
    }
  }

  InversionResult result;
  std::vector<double> x = analyzer.istft(spectra, frames, samples);
  std::vector<double> best = x;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<double> mags(kBins), ch(channels), ratio(channels), gain(kBins);
  std::vector<cplx> previous;
  for (int it = 0; it <= iters; ++it) {
    auto analysis = analyzer.stft(x, frames);
    if (it > 0) {
      const double err = relative_error(analyzer.compressed(analysis, frames), spec.values);
      if (err < best_err) {
        best_err = err;
        best = x;
      }
      result.error_trace.push_back(best_err);
      if (it == iters) break;
    }
    // Rescale every bin by the filter-weighted mean of its channels'
    // target/current magnitude ratios, keeping the analysis phase.
    for (std::size_t t = 0; t < frames; ++t) {
      cplx* row = analysis.data() + t * kBins;
      for (std::size_t b = 0; b < kBins; ++b) mags[b] = std::abs(row[b]) * analyzer.scale();
      analyzer.project(mags, ch);
      for (std::size_t c = 0; c < channels; ++c) {
        ratio[c] = (target_m[t * channels + c] + kRatioFloor) / (ch[c] + kRatioFloor);
      }
      std::fill(gain.begin(), gain.end(), 0.0);
      analyzer.back_project(ratio, gain);
      for (std::size_t b = 0; b < kBins; ++b) {
        row[b] = coverage[b] > 0.0 ? row[b] * (gain[b] / coverage[b]) : cplx(0.0, 0.0);
      }
    }
    if (!previous.empty()) {
      for (std::size_t i = 0; i < analysis.size(); ++i) {
        const cplx projected = analysis[i];
        analysis[i] = projected + kMomentum * (projected - previous[i]);
        previous[i] = projected;
      }
    } else {
      previous = analysis;
    }
    x = analyzer.istft(analysis, frames, samples);
  }
  result.wav.assign(best.begin(), best.end());
  return result;
}

SourceFeatures estimate_source_features(std::span<const float> wav, int fs) {
  require_rate(fs);
  SourceFeatures out;
  const std::size_t frames = static_cast<std::size_t>(
      std::llround(static_cast<double>(wav.size()) / static_cast<double>(kSourceHop)));
  out.aperiodicity.resize(frames);
  out.periodicity.resize(frames);
  out.pitch_hz.resize(frames);
  const auto lag_min = static_cast<std::size_t>(std::floor(kSampleRate / kPitchMaxHz));
  const auto lag_max = static_cast<std::size_t>(std::ceil(kSampleRate / kPitchMinHz));
  const auto n = static_cast<std::ptrdiff_t>(wav.size());
  std::vector<double> seg(kSourceWindow);
  std::vector<double> r(lag_max + 2, 0.0);

  for (std::size_t t = 0; t < frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * kSourceHop + kSourceHop / 2) -
                                 static_cast<std::ptrdiff_t>(kSourceWindow / 2);
    double mean = 0.0;
    for (std::size_t j = 0; j < kSourceWindow; ++j) {
      const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(j);
      seg[j] = (i >= 0 && i < n) ? wav[static_cast<std::size_t>(i)] : 0.0;
      mean += seg[j];
    }
    mean /= static_cast<double>(kSourceWindow);
    double energy = 0.0;
    for (auto& s : seg) {
      s -= mean;
      energy += s * s;
    }
    double periodicity = 0.0, pitch = 0.0;
    if (energy / static_cast<double>(kSourceWindow) > 1e-10) {
      std::fill(r.begin(), r.end(), 0.0);
      double r_max = 0.0;
      for (std::size_t lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t j = 0; j + lag < kSourceWindow; ++j) {
          xy += seg[j] * seg[j + lag];
          xx += seg[j] * seg[j];
          yy += seg[j + lag] * seg[j + lag];
        }
        r[lag] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
        if (lag >= lag_min && lag <= lag_max) r_max = std::max(r_max, r[lag]);
      }
      // Smallest-lag local maximum close to the global one avoids octave errors.
      std::size_t best = 0;
      for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
        if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= 0.9 * r_max) {
          best = lag;
          break;
        }
      }
      if (best != 0 && r_max > 0.0) {
        periodicity = std::clamp(r[best], 0.0, 1.0);
        const double a = r[best - 1], b = r[best], c = r[best + 1];
        const double denom = a - 2.0 * b + c;
        const double shift = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
        pitch = kSampleRate / (static_cast<double>(best) + std::clamp(shift, -0.5, 0.5));
      }
    }
    if (periodicity < kVoicingThreshold) pitch = 0.0;
    out.periodicity[t] = static_cast<float>(periodicity);
    out.aperiodicity[t] = static_cast<float>(std::clamp(1.0 - periodicity, 0.0, 1.0));
    out.pitch_hz[t] = static_cast<float>(pitch);
  }
  return out;
}

}  // namespace mirrornet::audio
