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
#include <vector>

#include "mirrornet/audfront.hpp"
#include "mirrornet/data.hpp"

namespace mirrornet::data {

// Closed-form stand-in for an articulatory synthesizer. Each 125 Hz frame
// is built from the trajectory linearly interpolated at t * 100 / 125:
//
//   E(f) = base + sum_j gain_j * exp(-0.5 * (ln(f / F_j) / width_j)^2)
//   M_c  = floor + per * v(pitch) * sum_h level * h^-rolloff * E(h f0) * G_c(h f0)
//               + ap * noise * E(f_c)
//
// with three formants: F1 from LA (gain from LP), F2 from TBCD (width from
// TBCL), F3 from TTCD (gain from TTCL). G_c is the auditory filter response,
// v() a smooth voicing gate on pitch, and the result is compressed exactly
// like the auditory front end.
struct OracleParams {
  // Formant center ranges mapped log-linearly from TV values in [-1, 1].
  double f1_lo = 300.0, f1_hi = 900.0;
  double f2_lo = 900.0, f2_hi = 2400.0;
  double f3_lo = 2600.0, f3_hi = 4000.0;
  double f1_gain = 1.0, f2_gain = 0.8, f3_gain = 1.0;
  double f1_width = 0.12, f2_width = 0.14, f3_width = 0.08;  // ln-frequency units
  double modulation = 2.0;  // gain/width log-sensitivity to LP, TBCL, TTCL
  double base = 0.05;
  double harmonic_level = 0.05;
  double rolloff = 0.3;
  double noise = 0.03;
  double floor = 1e-4;
  audio::AudSpecConfig audspec{};
};

// Valid ranges: TVs [-1, 1], ap/per [0, 1], pitch [0, 400] Hz.
struct OracleDiagnostics {
  std::size_t clamped = 0;
};

// traj: 9 x k in file units, k a multiple of 4. Returns 128 x (k * 5 / 4).
// Out-of-range values are clamped; the count goes to `diag` when given,
// otherwise a warning is logged.
audio::AuditorySpectrogram oracle_synth(const OracleParams& params, const Tensor<float>& traj,
                                        OracleDiagnostics* diag = nullptr);

struct SyntheticOptions {
  std::size_t items_per_speaker = 1;
  OracleParams oracle{};
};

// Smooth random trajectories (8 Hz low-passed noise for the TVs), alternating
// voiced/unvoiced spans with ramped periodicity, pitch in [80, 300] Hz while
// voiced and 0 otherwise, and oracle spectrograms. k = 4 * round(25 * duration).
// Deterministic per seed. All items are tagged train.
std::vector<Utterance> gen_synthetic(std::size_t n_items, double duration_s,
                                     std::uint64_t seed, const SyntheticOptions& opts = {});

struct WriteOptions {
  bool audio = false;  // also write WAVs inverted from the spectrograms
  int inversion_iters = 32;
};

// Writes <dir>/manifest.json plus traj/<id>.csv, spec/<id>.csv and, with
// opts.audio, wav/<id>.wav. Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                    const std::vector<Utterance>& items,
                                    const WriteOptions& opts = {});

}  // namespace mirrornet::data
