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
#include <functional>
#include <stdexcept>
#include <vector>

#include "mirrornet/autodiff.hpp"

namespace mirrornet::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  // Probes whose +-h evaluations crossed a relu kink and were retried with a
  // step ten times smaller, and probes still crossing at the smallest step,
  // which are left out of the comparison.
  std::size_t kink_retries = 0;
  std::size_t kink_skips = 0;
  bool pass = false;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ScalarFn = std::function<Var<double>(const Var<double>&)>;

// Compares the analytic gradient of a scalar-valued f at x against central
// differences (f(x+h) - f(x-h)) / 2h, element by element. The relative error
// of an element is |a - n| / max(|a|, |n|, abs_floor), so gradients far below
// abs_floor are compared in absolute terms. Central differences are only valid
// when both evaluations stay on the linear piece of every relu that x is on;
// a probe that crosses a kink is retried with h / 10 and h / 100.
GradCheckReport grad_check(const ScalarFn& f, const Tensor<double>& x,
                           double h = 1e-5, double tol = 1e-4,
                           double abs_floor = 1e-6);

// Same comparison against existing leaves (e.g. network parameters), with
// `loss` re-evaluated for every perturbation. When max_per_leaf is nonzero,
// only that many elements per leaf are probed, chosen with `seed`.
GradCheckReport grad_check_leaves(const std::function<Var<double>()>& loss,
                                  std::vector<Var<double>> leaves,
                                  double h = 1e-5, double tol = 1e-4,
                                  std::size_t max_per_leaf = 0,
                                  std::uint64_t seed = 0,
                                  double abs_floor = 1e-6);

}  // namespace mirrornet::ad
