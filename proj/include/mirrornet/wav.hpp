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

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mirrornet::audio {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Wav {
  int sample_rate = 16000;
  std::vector<float> samples;  // mono, full scale = 1.0
};

// RIFF/WAVE, PCM 16-bit, mono. Other layouts raise WavError.
Wav read_wav(const std::filesystem::path& path);
// Samples are clipped to [-1, 1] and quantized to 16 bits.
void write_wav(const std::filesystem::path& path, const Wav& wav);

}  // namespace mirrornet::audio
