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
#include <limits>
#include <stdexcept>
#include <vector>

#include "mirrornet/layers.hpp"

namespace mirrornet::nn {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moments, index-aligned with the ParamList the
// state was created for.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::size_t t = 0;

  AdamState() = default;
  explicit AdamState(const ParamList<T>& params, AdamHyper h = {});
};

// Bias-corrected Adam:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Parameters without a gradient (frozen this step) are left untouched, but t
// still advances. Throws NonFiniteGradient naming the offending parameter.
template <typename T>
void adam_step(const ParamList<T>& params, AdamState<T>& state, double lr);

// Halves the learning rate when the monitored loss has not improved for
// `patience` consecutive epochs.
class LrScheduler {
 public:
  LrScheduler(double lr, double decay = 0.5, std::size_t patience = 5)
      : lr_(lr), decay_(decay), patience_(patience) {}

  double step(double monitored_loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t stagnant_epochs() const { return stagnant_; }
  std::size_t decay_events() const { return decays_; }

 private:
  double lr_;
  double decay_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stagnant_ = 0;
  std::size_t decays_ = 0;
};

}  // namespace mirrornet::nn
