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
#include <string>
#include <vector>

#include "mirrornet/autodiff.hpp"
#include "mirrornet/random.hpp"

namespace mirrornet::nn {

template <typename T>
using Var = ad::Var<T>;

// Named handle on a trainable leaf. Order of a parameter list is the
// serialization order.
template <typename T>
struct ParamRef {
  std::string name;
  Var<T>* var;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& p : params) p.var->zero_grad();
}

template <typename T>
void set_trainable(const ParamList<T>& params, bool on) {
  for (const auto& p : params) p.var->set_requires_grad(on);
}

// Copies parameter values between lists of identical layout, converting the
// scalar type if needed.
template <typename T, typename U>
void copy_params(const ParamList<T>& from, const ParamList<U>& to) {
  if (from.size() != to.size()) throw ShapeError("copy_params: list size mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].var->shape() != to[i].var->shape()) {
      throw ShapeError("copy_params: shape mismatch at " + from[i].name);
    }
    to[i].var->mutable_value() = from[i].var->value().template cast<U>();
  }
}

// "Same"-padded 1-D convolution, weight C_out x C_in x K. Weights are drawn
// uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)] and biases start at zero.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t dilation, Rng& rng);

  // Copies own their parameters.
  Conv1d(const Conv1d& other)
      : weight_(Var<T>::leaf(other.weight_.value(), other.weight_.requires_grad())),
        bias_(Var<T>::leaf(other.bias_.value(), other.bias_.requires_grad())),
        dilation_(other.dilation_) {}
  Conv1d& operator=(const Conv1d& other) {
    if (this != &other) *this = Conv1d(other);
    return *this;
  }
  Conv1d(Conv1d&&) noexcept = default;
  Conv1d& operator=(Conv1d&&) noexcept = default;

  Var<T> operator()(const Var<T>& x) const;

  std::size_t in_channels() const { return weight_.shape()[1]; }
  std::size_t out_channels() const { return weight_.shape()[0]; }
  std::size_t kernel() const { return weight_.shape()[2]; }
  std::size_t dilation() const { return dilation_; }

  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }
  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

  void collect(const std::string& prefix, ParamList<T>& out);

 private:
  Var<T> weight_;
  Var<T> bias_;
  std::size_t dilation_ = 1;
};

// Three kernel-3 dilated convolutions, each followed by ReLU. Channel count
// is preserved.
template <typename T>
class TcnStack {
 public:
  TcnStack() = default;
  TcnStack(std::size_t channels, const std::vector<std::size_t>& dilations,
           std::size_t kernel, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;

  const std::vector<Conv1d<T>>& layers() const { return layers_; }
  void collect(const std::string& prefix, ParamList<T>& out);

 private:
  std::vector<Conv1d<T>> layers_;
};

template <typename T>
Var<T> relu(const Var<T>& x) {
  return ad::relu(x);
}
template <typename T>
Var<T> upsample1d(const Var<T>& x, std::size_t factor) {
  return ad::upsample1d(x, factor);
}
template <typename T>
Var<T> avgpool1d(const Var<T>& x, std::size_t window) {
  return ad::avgpool1d(x, window);
}
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  return ad::mse(a, b);
}

}  // namespace mirrornet::nn
