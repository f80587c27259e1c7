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

#include "mirrornet/network.hpp"

#include <stdexcept>
#include <string>

namespace mirrornet {

void ArchConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model: " + msg); };
  if (spec_channels == 0) fail("spec_channels must be positive");
  if (latent_channels == 0) fail("latent_channels must be positive");
  if (pre_post_filters.size() != 3) fail("pre_post_filters needs 3 entries");
  if (enc_filters.size() != 3) fail("enc_filters needs 3 entries");
  for (auto f : pre_post_filters) if (f == 0) fail("filter counts must be positive");
  for (auto f : enc_filters) if (f == 0) fail("filter counts must be positive");
  if (pre_post_filters[0] != spec_channels) {
    fail("pre_post_filters[0] (C1/C12) must equal the spectrogram channel count");
  }
  if (enc_filters[2] != latent_channels) {
    fail("enc_filters[2] (C6) must equal latent_channels");
  }
  if (dilations.empty()) fail("dilations must not be empty");
  for (auto d : dilations) if (d == 0) fail("dilations must be positive");
  if (kernel != 1 && kernel != 3) fail("kernel must be 1 or 3");
  if (up == 0 || down == 0) fail("up_down factors must be positive");
}

std::size_t ArchConfig::latent_frames(std::size_t frames) const {
  if (frames == 0 || frames % down != 0) {
    throw ShapeError("spectrogram length " + std::to_string(frames) +
                     " must be a positive multiple of " + std::to_string(down));
  }
  return frames * up / down;
}

std::size_t ArchConfig::spec_frames(std::size_t latent) const {
  if (latent == 0 || latent % up != 0) {
    throw ShapeError("latent length " + std::to_string(latent) +
                     " must be a positive multiple of " + std::to_string(up));
  }
  return latent * down / up;
}

template <typename T>
Encoder<T>::Encoder(const ArchConfig& arch, Rng& rng) : arch_(arch) {
  arch_.validate();
  const auto& pp = arch_.pre_post_filters;
  const auto& ef = arch_.enc_filters;
  c1_ = nn::Conv1d<T>(arch_.spec_channels, pp[0], 1, 1, rng);
  c2_ = nn::Conv1d<T>(pp[0], pp[1], 1, 1, rng);
  c3_ = nn::Conv1d<T>(pp[1], pp[2], 1, 1, rng);
  tcn_ = nn::TcnStack<T>(pp[2], arch_.dilations, arch_.kernel, rng);
  c4_ = nn::Conv1d<T>(pp[2], ef[0], 1, 1, rng);
  c5_ = nn::Conv1d<T>(ef[0], ef[1], 1, 1, rng);
  c6_ = nn::Conv1d<T>(ef[1], ef[2], 1, 1, rng);
}

template <typename T>
ad::Var<T> Encoder<T>::operator()(const ad::Var<T>& spec) const {
  if (spec.shape().size() != 2 || spec.shape()[0] != arch_.spec_channels) {
    throw ShapeError("encode: expected " + std::to_string(arch_.spec_channels) +
                     " x L input, got " + shape_str(spec.shape()));
  }
  arch_.latent_frames(spec.shape()[1]);
  using ad::relu;
  auto h = relu(c1_(spec));
  h = relu(c2_(h));
  h = relu(c3_(h));
  h = tcn_(h);
  h = relu(c4_(h));
  h = ad::upsample1d(h, arch_.up);
  h = relu(c5_(h));
  h = ad::avgpool1d(h, arch_.down);
  return c6_(h);
}

template <typename T>
nn::ParamList<T> Encoder<T>::parameters() {
  nn::ParamList<T> out;
  c1_.collect("encoder.c1", out);
  c2_.collect("encoder.c2", out);
  c3_.collect("encoder.c3", out);
  tcn_.collect("encoder.tcn", out);
  c4_.collect("encoder.c4", out);
  c5_.collect("encoder.c5", out);
  c6_.collect("encoder.c6", out);
  return out;
}

template <typename T>
Decoder<T>::Decoder(const ArchConfig& arch, Rng& rng, std::size_t input_channels)
    : arch_(arch) {
  arch_.validate();
  const auto& pp = arch_.pre_post_filters;
  const auto& ef = arch_.enc_filters;
  const std::size_t in = input_channels == 0 ? arch_.latent_channels : input_channels;
  c7_ = nn::Conv1d<T>(in, ef[1], 1, 1, rng);
  c8_ = nn::Conv1d<T>(ef[1], ef[0], 1, 1, rng);
  c9_ = nn::Conv1d<T>(ef[0], pp[2], 1, 1, rng);
  tcn_ = nn::TcnStack<T>(pp[2], arch_.dilations, arch_.kernel, rng);
  c10_ = nn::Conv1d<T>(pp[2], pp[2], 1, 1, rng);
  c11_ = nn::Conv1d<T>(pp[2], pp[1], 1, 1, rng);
  c12_ = nn::Conv1d<T>(pp[1], pp[0], 1, 1, rng);
}

template <typename T>
ad::Var<T> Decoder<T>::operator()(const ad::Var<T>& latent) const {
  if (latent.shape().size() != 2 || latent.shape()[0] != input_channels()) {
    throw ShapeError("decode: expected " + std::to_string(input_channels()) +
                     " x k input, got " + shape_str(latent.shape()));
  }
  arch_.spec_frames(latent.shape()[1]);
  using ad::relu;
  auto h = relu(c7_(latent));
  h = ad::upsample1d(h, arch_.down);
  h = relu(c8_(h));
  h = ad::avgpool1d(h, arch_.up);
  h = relu(c9_(h));
  h = tcn_(h);
  h = relu(c10_(h));
  h = relu(c11_(h));
  return c12_(h);
}

template <typename T>
nn::ParamList<T> Decoder<T>::parameters() {
  nn::ParamList<T> out;
  c7_.collect("decoder.c7", out);
  c8_.collect("decoder.c8", out);
  c9_.collect("decoder.c9", out);
  tcn_.collect("decoder.tcn", out);
  c10_.collect("decoder.c10", out);
  c11_.collect("decoder.c11", out);
  c12_.collect("decoder.c12", out);
  return out;
}

template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;

}  // namespace mirrornet
