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
#include <vector>

#include "mirrornet/layers.hpp"

namespace mirrornet {

// Layer widths of the encoder/decoder pair. The pre/post stack (C1-C3 and
// C12-C10) is 1x1 convolutions; C4/C5 and their decoder mirrors C9/C8 are
// 1x1 as well. Time resolution changes only through the nearest-neighbour
// upsample / average pool pairs:
//   encoder  128xL -> C1,C2,C3 -> TCN -> C4 -> up(4) -> C5 -> pool(5) -> C6
//   decoder  Nxk   -> C7 -> up(5) -> C8 -> pool(4) -> C9 -> TCN -> C10,C11,C12
struct ArchConfig {
  std::size_t spec_channels = 128;
  std::size_t latent_channels = 9;
  std::vector<std::size_t> pre_post_filters{128, 256, 256};  // C1, C2, C3
  std::vector<std::size_t> enc_filters{256, 128, 9};         // C4, C5, C6
  std::vector<std::size_t> dilations{1, 4, 16};
  std::size_t kernel = 3;
  std::size_t up = 4;    // encoder upsample (decoder pool)
  std::size_t down = 5;  // encoder pool (decoder upsample)

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Latent frames for a spectrogram of `frames` frames; throws ShapeError
  // when `frames` is not a multiple of `down`.
  std::size_t latent_frames(std::size_t frames) const;
  std::size_t spec_frames(std::size_t latent) const;

  bool operator==(const ArchConfig&) const = default;
};

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const ArchConfig& arch, Rng& rng);

  // spec_channels x L -> latent_channels x (L * up / down)
  ad::Var<T> operator()(const ad::Var<T>& spec) const;

  nn::ParamList<T> parameters();
  const ArchConfig& arch() const { return arch_; }

 private:
  ArchConfig arch_;
  nn::Conv1d<T> c1_, c2_, c3_;
  nn::TcnStack<T> tcn_;
  nn::Conv1d<T> c4_, c5_, c6_;
};

template <typename T>
class Decoder {
 public:
  Decoder() = default;
  // `input_channels` defaults to the latent width; the synthesizer ablation
  // feeds six channels through an otherwise identical network.
  Decoder(const ArchConfig& arch, Rng& rng, std::size_t input_channels = 0);

  // input_channels x k -> spec_channels x (k * down / up)
  ad::Var<T> operator()(const ad::Var<T>& latent) const;

  nn::ParamList<T> parameters();
  const ArchConfig& arch() const { return arch_; }
  std::size_t input_channels() const { return c7_.in_channels(); }

 private:
  ArchConfig arch_;
  nn::Conv1d<T> c7_, c8_, c9_;
  nn::TcnStack<T> tcn_;
  nn::Conv1d<T> c10_, c11_, c12_;
};

}  // namespace mirrornet
