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

#include "mirrornet/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace mirrornet {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace mirrornet

namespace mirrornet::ad {
namespace {

thread_local bool g_no_grad = false;
thread_local KinkMonitor* g_kink_monitor = nullptr;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
// One kernel tap of a C_out x C_in x K weight viewed as a C_out x C_in matrix.
template <typename T>
using TapMap =
    Eigen::Map<const RowMat<T>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

template <typename T>
VecMap<T> vec(Tensor<T>& t) {
  return VecMap<T>(t.raw(), static_cast<Eigen::Index>(t.size()));
}
template <typename T>
ConstVecMap<T> vec(const Tensor<T>& t) {
  return ConstVecMap<T>(t.raw(), static_cast<Eigen::Index>(t.size()));
}
template <typename T>
MatMap<T> mat(Tensor<T>& t) {
  return MatMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
ConstMatMap<T> mat(const Tensor<T>& t) {
  return ConstMatMap<T>(t.raw(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) {
    throw ShapeError(std::string(op) + ": expected a C x L tensor, got " +
                     shape_str(s));
  }
}

template <typename T>
bool wants_grad(const Var<T>& v) {
  return v.requires_grad();
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::enabled() { return g_no_grad; }

template <typename T>
Tape<T>& Tape<T>::local() {
  thread_local Tape<T> tape;
  return tape;
}

template <typename T>
void Tape<T>::record(const std::shared_ptr<Node<T>>& node) {
  node->tape_pos = nodes_.size();
  nodes_.push_back(node);
}

template <typename T>
void Tape<T>::clear() {
  for (auto& node : nodes_) {
    node->tape_pos = Node<T>::kNotRecorded;
    node->backward = nullptr;
    node->parents.clear();
  }
  nodes_.clear();
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  const auto& root = loss.node();
  if (root->is_leaf) {
    // A leaf loss is its own gradient.
    if (root->requires_grad) root->grad_buffer()[0] += T{1};
    return;
  }
  if (root->tape_pos == Node<T>::kNotRecorded ||
      root->tape_pos >= nodes_.size() || nodes_[root->tape_pos] != root) {
    throw std::logic_error("backward: loss is not on this thread's tape");
  }
  // Interior grads are per-replay; only leaves accumulate.
  for (std::size_t i = 0; i <= root->tape_pos; ++i) nodes_[i]->grad = Tensor<T>();
  root->grad_buffer()[0] = T{1};
  for (std::size_t i = root->tape_pos + 1; i-- > 0;) {
    Node<T>& node = *nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(node);
  }
}

template <typename T>
bool Tape<T>::verify_order() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i]->tape_pos != i) return false;
    for (const auto& parent : nodes_[i]->parents) {
      if (parent->tape_pos != Node<T>::kNotRecorded && parent->tape_pos >= i) {
        return false;
      }
    }
  }
  return true;
}

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::string op,
                   std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = std::move(op);
  node->is_leaf = false;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Var<T>& v) { return wants_grad(v); });
  if (any && !g_no_grad) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward_fn);
    Tape<T>::local().record(node);
  }
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()) + vec(b.value());
  return make_result<T>(std::move(out), {a, b}, "add", [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) vec(p->grad_buffer()) += vec(self.grad);
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()) - vec(b.value());
  return make_result<T>(std::move(out), {a, b}, "sub", [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) vec(pa->grad_buffer()) += vec(self.grad);
    if (pb->requires_grad) vec(pb->grad_buffer()) -= vec(self.grad);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()).cwiseProduct(vec(b.value()));
  return make_result<T>(std::move(out), {a, b}, "mul", [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      vec(pa->grad_buffer()) += vec(self.grad).cwiseProduct(vec(pb->value));
    }
    if (pb->requires_grad) {
      vec(pb->grad_buffer()) += vec(self.grad).cwiseProduct(vec(pa->value));
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()) * s;
  return make_result<T>(std::move(out), {a}, "scale", [s](Node<T>& self) {
    vec(self.parents[0]->grad_buffer()) += vec(self.grad) * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()).array() + s;
  return make_result<T>(std::move(out), {a}, "add_scalar", [](Node<T>& self) {
    vec(self.parents[0]->grad_buffer()) += vec(self.grad);
  });
}

KinkMonitor::KinkMonitor() : previous_(g_kink_monitor) { g_kink_monitor = this; }

KinkMonitor::~KinkMonitor() { g_kink_monitor = previous_; }

KinkMonitor* KinkMonitor::active() { return g_kink_monitor; }

template <typename T>
void KinkMonitor::fold(std::span<const T> input) {
  // FNV-1a over one bit per element, packed into 64-bit words.
  std::uint64_t word = 0;
  std::size_t bits = 0;
  auto mix = [this](std::uint64_t w) {
    digest_ ^= w;
    digest_ *= 1099511628211ull;
  };
  for (const T v : input) {
    word = (word << 1) | static_cast<std::uint64_t>(v > T{0});
    if (++bits == 64) {
      mix(word);
      word = 0;
      bits = 0;
    }
  }
  mix(word);
  mix(input.size());
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  if (auto* monitor = KinkMonitor::active()) monitor->fold(a.value().data());
  Tensor<T> out(a.shape());
  vec(out) = vec(a.value()).cwiseMax(T{0});
  return make_result<T>(std::move(out), {a}, "relu", [](Node<T>& self) {
    auto& p = self.parents[0];
    vec(p->grad_buffer()) +=
        (vec(p->value).array() > T{0}).select(vec(self.grad), T{0});
  });
}

template <typename T>
Var<T> reduce_sum(const Var<T>& a) {
  const T total = vec(a.value()).sum();
  return make_result<T>(Tensor<T>::scalar(total), {a}, "reduce_sum",
                        [](Node<T>& self) {
                          vec(self.parents[0]->grad_buffer()).array() +=
                              self.grad[0];
                        });
}

template <typename T>
Var<T> reduce_mean(const Var<T>& a) {
  if (!a.defined() || a.value().empty()) {
    throw ShapeError("reduce_mean: empty tensor");
  }
  const T n = static_cast<T>(a.size());
  const T mean = vec(a.value()).sum() / n;
  return make_result<T>(Tensor<T>::scalar(mean), {a}, "reduce_mean",
                        [n](Node<T>& self) {
                          vec(self.parents[0]->grad_buffer()).array() +=
                              self.grad[0] / n;
                        });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              std::size_t dilation) {
  require_rank2(x.shape(), "conv1d");
  const Shape& ws = weight.shape();
  if (ws.size() != 3) {
    throw ShapeError("conv1d: weight must be C_out x C_in x K, got " +
                     shape_str(ws));
  }
  const std::size_t c_out = ws[0], c_in = ws[1], k = ws[2];
  if (x.shape()[0] != c_in) {
    throw ShapeError("conv1d: channel mismatch, input " + shape_str(x.shape()) +
                     " vs weight " + shape_str(ws));
  }
  if (k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
  if (bias.shape() != Shape{c_out}) {
    throw ShapeError("conv1d: bias must have C_out elements");
  }
  if (dilation == 0) throw ShapeError("conv1d: dilation must be positive");

  const auto len = static_cast<Eigen::Index>(x.shape()[1]);
  const auto ci = static_cast<Eigen::Index>(c_in);
  const auto co = static_cast<Eigen::Index>(c_out);
  const auto kk = static_cast<Eigen::Index>(k);
  const auto half = kk / 2;
  const auto dil = static_cast<Eigen::Index>(dilation);
  const Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic> tap_stride(ci * kk, kk);

  // Tap j reads x[:, t + off] for t in [t0, t0 + n).
  struct TapSpan {
    Eigen::Index tap, t0, src0, n;
  };
  std::vector<TapSpan> taps;
  for (Eigen::Index j = 0; j < kk; ++j) {
    const Eigen::Index off = (j - half) * dil;
    const Eigen::Index n = len - (off < 0 ? -off : off);
    if (n <= 0) continue;
    taps.push_back({j, off < 0 ? -off : 0, off < 0 ? 0 : off, n});
  }

  Tensor<T> out(Shape{c_out, x.shape()[1]});
  auto y = mat(out);
  y.colwise() = vec(bias.value());
  const auto xm = mat(x.value());
  for (const auto& tp : taps) {
    TapMap<T> w(weight.value().raw() + tp.tap, co, ci, tap_stride);
    y.middleCols(tp.t0, tp.n).noalias() += w * xm.middleCols(tp.src0, tp.n);
  }

  return make_result<T>(
      std::move(out), {x, weight, bias}, "conv1d",
      [taps, co, ci, kk, tap_stride](Node<T>& self) {
        auto& px = self.parents[0];
        auto& pw = self.parents[1];
        auto& pb = self.parents[2];
        const auto gy = mat(std::as_const(self.grad));
        if (pb->requires_grad) vec(pb->grad_buffer()) += gy.rowwise().sum();
        if (pw->requires_grad) {
          const auto xm = mat(std::as_const(px->value));
          T* gw = pw->grad_buffer().raw();
          for (const auto& tp : taps) {
            Eigen::Map<RowMat<T>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>
                gtap(gw + tp.tap, co, ci, tap_stride);
            gtap.noalias() += gy.middleCols(tp.t0, tp.n) *
                              xm.middleCols(tp.src0, tp.n).transpose();
          }
        }
        if (px->requires_grad) {
          auto gx = mat(px->grad_buffer());
          for (const auto& tp : taps) {
            TapMap<T> w(pw->value.raw() + tp.tap, co, ci, tap_stride);
            gx.middleCols(tp.src0, tp.n).noalias() +=
                w.transpose() * gy.middleCols(tp.t0, tp.n);
          }
        }
      });
}

template <typename T>
Var<T> upsample1d(const Var<T>& x, std::size_t factor) {
  require_rank2(x.shape(), "upsample1d");
  if (factor == 0) throw ShapeError("upsample1d: factor must be >= 1");
  const std::size_t c = x.shape()[0], len = x.shape()[1];
  Tensor<T> out(Shape{c, len * factor});
  for (std::size_t r = 0; r < c; ++r) {
    const auto src = x.value().row(r);
    auto dst = out.row(r);
    for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = src[t / factor];
  }
  return make_result<T>(std::move(out), {x}, "upsample1d", [factor](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto src = std::as_const(self.grad).row(r);
      auto dst = g.row(r);
      for (std::size_t t = 0; t < src.size(); ++t) dst[t / factor] += src[t];
    }
  });
}

template <typename T>
Var<T> avgpool1d(const Var<T>& x, std::size_t window) {
  require_rank2(x.shape(), "avgpool1d");
  const std::size_t c = x.shape()[0], len = x.shape()[1];
  if (window == 0 || len % window != 0) {
    throw ShapeError("avgpool1d: length " + std::to_string(len) +
                     " is not divisible by window " + std::to_string(window));
  }
  const T inv = T{1} / static_cast<T>(window);
  Tensor<T> out(Shape{c, len / window});
  for (std::size_t r = 0; r < c; ++r) {
    const auto src = x.value().row(r);
    auto dst = out.row(r);
    for (std::size_t t = 0; t < dst.size(); ++t) {
      T acc{0};
      for (std::size_t j = 0; j < window; ++j) acc += src[t * window + j];
      dst[t] = acc * inv;
    }
  }
  return make_result<T>(std::move(out), {x}, "avgpool1d",
                        [window, inv](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          for (std::size_t r = 0; r < g.rows(); ++r) {
                            const auto src = std::as_const(self.grad).row(r);
                            auto dst = g.row(r);
                            for (std::size_t t = 0; t < dst.size(); ++t) {
                              dst[t] += src[t / window] * inv;
                            }
                          }
                        });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  const auto diff = sub(a, b);
  return reduce_mean(mul(diff, diff));
}

#define MIRRORNET_INSTANTIATE(T)                                               \
  template class Tape<T>;                                                      \
  template void KinkMonitor::fold<T>(std::span<const T>);                      \
  template Var<T> make_result<T>(Tensor<T>, std::vector<Var<T>>, std::string,  \
                                 std::function<void(Node<T>&)>);               \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> scale<T>(const Var<T>&, T);                                  \
  template Var<T> add_scalar<T>(const Var<T>&, T);                             \
  template Var<T> relu<T>(const Var<T>&);                                      \
  template Var<T> reduce_sum<T>(const Var<T>&);                                \
  template Var<T> reduce_mean<T>(const Var<T>&);                               \
  template Var<T> conv1d<T>(const Var<T>&, const Var<T>&, const Var<T>&,       \
                            std::size_t);                                      \
  template Var<T> upsample1d<T>(const Var<T>&, std::size_t);                   \
  template Var<T> avgpool1d<T>(const Var<T>&, std::size_t);                    \
  template Var<T> mse<T>(const Var<T>&, const Var<T>&);

MIRRORNET_INSTANTIATE(float)
MIRRORNET_INSTANTIATE(double)

#undef MIRRORNET_INSTANTIATE

}  // namespace mirrornet::ad
