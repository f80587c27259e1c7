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

#include "mirrornet/layers.hpp"

#include <cmath>

namespace mirrornet::nn {

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels,
                  std::size_t kernel, std::size_t dilation, Rng& rng)
    : dilation_(dilation) {
  if (kernel != 1 && kernel != 3) throw ShapeError("Conv1d: kernel must be 1 or 3");
  if (dilation == 0) throw ShapeError("Conv1d: dilation must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
  Tensor<T> w(Shape{out_channels, in_channels, kernel});
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  weight_ = Var<T>::leaf(std::move(w));
  bias_ = Var<T>::leaf(Tensor<T>(Shape{out_channels}, T{0}));
}

template <typename T>
Var<T> Conv1d<T>::operator()(const Var<T>& x) const {
  return ad::conv1d(x, weight_, bias_, dilation_);
}

template <typename T>
void Conv1d<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.push_back({prefix + ".weight", &weight_});
  out.push_back({prefix + ".bias", &bias_});
}

template <typename T>
TcnStack<T>::TcnStack(std::size_t channels,
                      const std::vector<std::size_t>& dilations,
                      std::size_t kernel, Rng& rng) {
  layers_.reserve(dilations.size());
  for (std::size_t d : dilations) layers_.emplace_back(channels, channels, kernel, d, rng);
}

template <typename T>
Var<T> TcnStack<T>::operator()(const Var<T>& x) const {
  Var<T> h = x;
  for (const auto& layer : layers_) h = ad::relu(layer(h));
  return h;
}

template <typename T>
void TcnStack<T>::collect(const std::string& prefix, ParamList<T>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + ".d" + std::to_string(i + 1), out);
  }
}

template class Conv1d<float>;
template class Conv1d<double>;
template class TcnStack<float>;
template class TcnStack<double>;

}  // namespace mirrornet::nn
