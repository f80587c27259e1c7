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

// Reverse-mode differentiation over Tensor values.
//
// Every differentiable op produces a Var whose node is appended to the
// calling thread's Tape when at least one input requires a gradient.
// backward(loss) replays the tape in reverse record order, which is a valid
// reverse topological order because an op can only consume nodes that were
// created before it. Leaf gradients accumulate across backward calls until
// zero_grad() is called.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mirrornet/tensor.hpp"

namespace mirrornet::ad {

template <typename T>
class Tape;

template <typename T>
struct Node {
  static constexpr std::size_t kNotRecorded =
      std::numeric_limits<std::size_t>::max();

  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool is_leaf = true;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;
  std::size_t tape_pos = kNotRecorded;

  // Zero-initialised gradient buffer for accumulation.
  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape(), T{0});
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<T> value, bool requires_grad = true) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Var(std::move(node));
  }
  static Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  // Optimizers and loaders write parameters in place.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool is_leaf() const { return node_->is_leaf; }

  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  // Same value, cut from the graph.
  Var detach() const { return constant(node_->value); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
class Tape {
 public:
  // One tape per thread and scalar type.
  static Tape& local();

  void record(const std::shared_ptr<Node<T>>& node);
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<Node<T>>>& nodes() const { return nodes_; }

  // Drops every recorded node. Vars that outlive the clear keep their values
  // but can no longer be differentiated through.
  void clear();

  void backward(const Var<T>& loss);

  // True when every recorded node's recorded parents precede it.
  bool verify_order() const;

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool enabled();

 private:
  bool previous_;
};

// While alive, every relu on the current thread folds the sign pattern of its
// input into digest(). Two evaluations with equal digests used the same linear
// piece of every relu, which is what a finite-difference probe relies on.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  void reset() { digest_ = kSeed; }
  std::uint64_t digest() const { return digest_; }

  // Called by relu.
  template <typename T>
  void fold(std::span<const T> input);
  static KinkMonitor* active();

 private:
  static constexpr std::uint64_t kSeed = 1469598103934665603ull;
  std::uint64_t digest_ = kSeed;
  KinkMonitor* previous_;
};

template <typename T>
void backward(const Var<T>& loss) {
  Tape<T>::local().backward(loss);
}

// Builds the result node of an op. Records it when grad mode is on and any
// parent requires a gradient; otherwise the result is a constant and
// `backward_fn` is dropped.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::string op,
                   std::function<void(Node<T>&)> backward_fn);

// Elementwise ops. Shapes must match exactly; there is no broadcasting
// beyond the tensor-with-scalar forms.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T s);
template <typename T>
Var<T> add_scalar(const Var<T>& a, T s);
template <typename T>
Var<T> relu(const Var<T>& a);

template <typename T>
Var<T> reduce_mean(const Var<T>& a);
template <typename T>
Var<T> reduce_sum(const Var<T>& a);

// 1-D "same" convolution over a C_in x L input with a C_out x C_in x K
// weight (K odd) and a C_out bias.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              std::size_t dilation);

// Nearest-neighbour repetition along time: C x L -> C x (L * factor).
template <typename T>
Var<T> upsample1d(const Var<T>& x, std::size_t factor);

// Non-overlapping mean along time: C x L -> C x (L / window).
template <typename T>
Var<T> avgpool1d(const Var<T>& x, std::size_t window);

// Mean squared error over all elements.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b);

}  // namespace mirrornet::ad
