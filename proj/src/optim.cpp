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

#include "mirrornet/optim.hpp"

#include <cmath>
#include <string>

namespace mirrornet::nn {

template <typename T>
AdamState<T>::AdamState(const ParamList<T>& params, AdamHyper h) : hyper(h) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.var->shape(), T{0});
    v.emplace_back(p.var->shape(), T{0});
  }
}

template <typename T>
void adam_step(const ParamList<T>& params, AdamState<T>& state, double lr) {
  if (state.m.size() != params.size()) {
    throw std::logic_error("adam_step: state does not match parameter list");
  }
  for (const auto& p : params) {
    if (!p.var->has_grad()) continue;
    for (T g : p.var->grad().data()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NonFiniteGradient("adam_step: non-finite gradient in " + p.name);
      }
    }
  }
  ++state.t;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var<T>& var = *params[i].var;
    if (!var.has_grad()) continue;
    const auto g = var.grad().data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto w = var.mutable_value().data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + state.hyper.eps);
      w[j] = static_cast<T>(w[j] - update);
    }
  }
}

double LrScheduler::step(double monitored_loss) {
  if (!std::isfinite(monitored_loss)) {
    throw std::invalid_argument("LrScheduler: monitored loss must be finite");
  }
  if (monitored_loss < best_) {
    best_ = monitored_loss;
    stagnant_ = 0;
    return lr_;
  }
  if (++stagnant_ >= patience_) {
    lr_ *= decay_;
    stagnant_ = 0;
    ++decays_;
  }
  return lr_;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(const ParamList<float>&, AdamState<float>&, double);
template void adam_step<double>(const ParamList<double>&, AdamState<double>&, double);

}  // namespace mirrornet::nn
