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

#include "mirrornet/grad_check.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numeric>
#include <random>

namespace mirrornet::ad {
namespace {

constexpr int kKinkRetries = 2;

double scalar_value(const Var<double>& v) {
  if (v.size() != 1) throw ShapeError("grad_check: function must be scalar");
  const double out = v.value()[0];
  if (!std::isfinite(out)) throw NonFiniteError("grad_check: non-finite loss");
  return out;
}

void compare(double analytic, double numeric, double tol, double abs_floor,
             GradCheckReport& report) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    throw NonFiniteError("grad_check: non-finite gradient");
  }
  const double abs_err = std::abs(analytic - numeric);
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  report.max_abs_err = std::max(report.max_abs_err, abs_err);
  report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
  ++report.checked;
  report.pass = report.max_rel_err < tol;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, const Tensor<double>& x, double h,
                           double tol, double abs_floor) {
  auto leaf = Var<double>::leaf(x, true);
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, h, tol, 0, 0,
                           abs_floor);
}

GradCheckReport grad_check_leaves(const std::function<Var<double>()>& loss,
                                  std::vector<Var<double>> leaves, double h,
                                  double tol, std::size_t max_per_leaf,
                                  std::uint64_t seed, double abs_floor) {
  auto& tape = Tape<double>::local();
  tape.clear();
  for (auto& leaf : leaves) leaf.zero_grad();
  {
    const auto out = loss();
    scalar_value(out);
    backward(out);
  }
  tape.clear();

  GradCheckReport report;
  report.pass = true;
  ad::KinkMonitor monitor;
  std::uint64_t pattern = 0;
  {
    NoGradGuard no_grad;
    monitor.reset();
    scalar_value(loss());
    pattern = monitor.digest();
  }
  // Evaluates at x + delta and reports whether every relu kept its piece.
  auto probe = [&](double& value, double orig, double delta, double& out) {
    value = orig + delta;
    monitor.reset();
    out = scalar_value(loss());
    return monitor.digest() == pattern;
  };
  std::mt19937_64 rng(seed);
  for (auto& leaf : leaves) {
    if (!leaf.has_grad()) {
      throw std::logic_error("grad_check: leaf received no gradient");
    }
    const Tensor<double> analytic = leaf.grad();
    std::vector<std::size_t> idx(leaf.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_per_leaf != 0 && idx.size() > max_per_leaf) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_leaf);
      std::sort(idx.begin(), idx.end());
    }
    auto& values = leaf.mutable_value();
    NoGradGuard no_grad;
    for (std::size_t i : idx) {
      const double orig = values[i];
      double step = h;
      bool smooth = false;
      for (int attempt = 0; attempt <= kKinkRetries; ++attempt, step /= 10.0) {
        double fp = 0.0, fm = 0.0;
        const bool up = probe(values[i], orig, step, fp);
        const bool down = probe(values[i], orig, -step, fm);
        values[i] = orig;
        if (up && down) {
          compare(analytic[i], (fp - fm) / (2.0 * step), tol, abs_floor, report);
          smooth = true;
          break;
        }
        if (attempt < kKinkRetries) ++report.kink_retries;
      }
      if (!smooth) ++report.kink_skips;
    }
  }
  return report;
}

}  // namespace mirrornet::ad
