#pragma once

// Dense rank-<=4 float tensors with define-by-run reverse-mode autodiff.
// Exactly the operations the flow network needs; no broadcasting beyond
// broadcast_channels, no views, no strides. A graph and its tensors belong
// to one thread for the duration of a forward+backward episode.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "flowspike/common.hpp"
#include "flowspike/kernels.hpp"

namespace flowspike {

class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<int> d) {
    if (d.size() > kMaxRank) throw shape_error("tensor rank exceeds 4");
    for (int e : d) {
      if (e <= 0) throw shape_error("non-positive shape extent " + std::to_string(e));
      dims_[rank_++] = e;
    }
  }

  int rank() const { return rank_; }
  int operator[](int i) const { return dims_[i]; }
  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }
  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    if (rank_ == 0) return "scalar";
    std::string s;
    for (int i = 0; i < rank_; ++i) s += (i ? "x" : "") + std::to_string(dims_[i]);
    return s;
  }

 private:
  std::array<int, kMaxRank> dims_{};
  int rank_ = 0;
};

namespace detail {
inline thread_local bool grad_mode = true;
}

inline bool grad_enabled() { return detail::grad_mode; }

// Disables graph recording on this thread for its lifetime (inference).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_mode) { detail::grad_mode = false; }
  ~NoGradGuard() { detail::grad_mode = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void(TensorNode<S>&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), S(0));
  }
};

template <typename S>
class TensorT {
 public:
  using Node = TensorNode<S>;

  TensorT() = default;

  static TensorT zeros(Shape shape) {
    TensorT t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = shape;
    t.n_->value.assign(static_cast<std::size_t>(shape.numel()), S(0));
    return t;
  }
  static TensorT full(Shape shape, S v) {
    TensorT t = zeros(shape);
    for (S& x : t.n_->value) x = v;
    return t;
  }
  static TensorT from_data(Shape shape, std::vector<S> data) {
    if (static_cast<std::int64_t>(data.size()) != shape.numel())
      throw shape_error("data length " + std::to_string(data.size()) + " does not match shape " +
                        shape.str());
    TensorT t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = shape;
    t.n_->value = std::move(data);
    return t;
  }
  static TensorT scalar(S v) { return full(Shape{}, v); }
  static TensorT uniform(Shape shape, S lo, S hi, Rng& rng) {
    TensorT t = zeros(shape);
    for (S& x : t.n_->value) x = static_cast<S>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::int64_t numel() const { return n_ ? n_->shape.numel() : 0; }

  std::span<const S> value() const& { return {n_->value.data(), n_->value.size()}; }
  std::span<const S> value() const&& = delete;  // would dangle past the temporary
  std::span<S> value_mut() { return {n_->value.data(), n_->value.size()}; }
  S item() const {
    if (numel() != 1) throw shape_error("item() on non-scalar tensor " + n_->shape.str());
    return n_->value[0];
  }
  S at(std::int64_t i) const { return n_->value[static_cast<std::size_t>(i)]; }

  bool requires_grad() const { return n_ && n_->requires_grad; }
  TensorT& set_requires_grad(bool b) {
    n_->requires_grad = b;
    return *this;
  }
  bool has_grad() const { return n_ && !n_->grad.empty(); }
  std::span<const S> grad() const& { return {n_->grad.data(), n_->grad.size()}; }
  std::span<const S> grad() const&& = delete;
  std::span<S> grad_mut() {
    n_->ensure_grad();
    return {n_->grad.data(), n_->grad.size()};
  }
  void zero_grad() {
    if (n_) n_->grad.clear();
  }

  // Same values, no graph history, no grad.
  TensorT detached() const {
    TensorT t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = n_->shape;
    t.n_->value = n_->value;
    return t;
  }

  template <typename T>
  TensorT<T> cast() const {
    std::vector<T> v(n_->value.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(n_->value[i]);
    return TensorT<T>::from_shape_data(n_->shape, std::move(v));
  }
  static TensorT from_shape_data(Shape shape, std::vector<S> data) {
    TensorT t;
    t.n_ = std::make_shared<Node>();
    t.n_->shape = shape;
    t.n_->value = std::move(data);
    return t;
  }

  std::shared_ptr<Node> node() const { return n_; }

  // Internal: construct an op result. Attaches graph edges only when some
  // parent is tracked, so pure inference records nothing.
  static TensorT op_result(Shape shape, std::vector<S> value,
                           std::vector<std::shared_ptr<Node>> parents,
                           std::function<void(Node&)> backward) {
    TensorT t = from_shape_data(shape, std::move(value));
    bool tracked = false;
    if (grad_enabled())
      for (const auto& p : parents) tracked = tracked || (p && p->requires_grad);
    if (tracked) {
      t.n_->requires_grad = true;
      t.n_->parents = std::move(parents);
      t.n_->backward = std::move(backward);
    }
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

using Tensor = TensorT<float>;

// ---------------------------------------------------------------------------
// backward engine

template <typename S>
void backward(const TensorT<S>& loss) {
  if (loss.numel() != 1)
    throw shape_error("backward() requires a scalar loss, got " + loss.shape().str());
  auto root = loss.node();
  if (!root || !root->requires_grad) return;  // constant: nothing reachable

  // reverse post-order over the parent DAG
  std::vector<TensorNode<S>*> order;
  std::unordered_set<TensorNode<S>*> seen;
  struct Frame {
    TensorNode<S>* n;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      TensorNode<S>* p = f.n->parents[f.next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  // interior grads are scratch per pass; leaves accumulate across passes
  for (TensorNode<S>* n : order)
    if (n->backward) n->grad.assign(n->value.size(), S(0));
  root->ensure_grad();
  root->grad[0] += S(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<S>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise ops

namespace detail {

template <typename S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw shape_error(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                      b.shape().str());
}

}  // namespace detail

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<S> v(a.value().begin(), a.value().end());
  for (std::int64_t i = 0; i < a.numel(); ++i) v[i] += b.at(i);
  return TensorT<S>::op_result(a.shape(), std::move(v), {a.node(), b.node()},
                               [](TensorNode<S>& self) {
                                 for (int k = 0; k < 2; ++k) {
                                   auto& p = *self.parents[k];
                                   if (!p.requires_grad) continue;
                                   p.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                     p.grad[i] += self.grad[i];
                                 }
                               });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<S> v(a.value().begin(), a.value().end());
  for (std::int64_t i = 0; i < a.numel(); ++i) v[i] -= b.at(i);
  return TensorT<S>::op_result(a.shape(), std::move(v), {a.node(), b.node()},
                               [](TensorNode<S>& self) {
                                 auto& pa = *self.parents[0];
                                 auto& pb = *self.parents[1];
                                 if (pa.requires_grad) {
                                   pa.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                     pa.grad[i] += self.grad[i];
                                 }
                                 if (pb.requires_grad) {
                                   pb.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                     pb.grad[i] -= self.grad[i];
                                 }
                               });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<S> v(static_cast<std::size_t>(a.numel()));
  for (std::int64_t i = 0; i < a.numel(); ++i) v[i] = a.at(i) * b.at(i);
  return TensorT<S>::op_result(a.shape(), std::move(v), {a.node(), b.node()},
                               [](TensorNode<S>& self) {
                                 auto& pa = *self.parents[0];
                                 auto& pb = *self.parents[1];
                                 if (pa.requires_grad) {
                                   pa.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                     pa.grad[i] += self.grad[i] * pb.value[i];
                                 }
                                 if (pb.requires_grad) {
                                   pb.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                     pb.grad[i] += self.grad[i] * pa.value[i];
                                 }
                               });
}

// a*x + b, elementwise with scalar coefficients (covers scale and 1-x)
template <typename S>
TensorT<S> affine(const TensorT<S>& x, S a, S b) {
  std::vector<S> v(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) v[i] = a * x.at(i) + b;
  return TensorT<S>::op_result(x.shape(), std::move(v), {x.node()}, [a](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += a * self.grad[i];
  });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S a) {
  return affine(x, a, S(0));
}

template <typename S>
TensorT<S> vtanh(const TensorT<S>& x) {
  std::vector<S> v(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) v[i] = std::tanh(x.at(i));
  return TensorT<S>::op_result(x.shape(), std::move(v), {x.node()}, [](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      S y = self.value[i];
      p.grad[i] += self.grad[i] * (S(1) - y * y);
    }
  });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  std::vector<S> v(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) v[i] = S(1) / (S(1) + std::exp(-x.at(i)));
  return TensorT<S>::op_result(x.shape(), std::move(v), {x.node()}, [](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      S y = self.value[i];
      p.grad[i] += self.grad[i] * y * (S(1) - y);
    }
  });
}

template <typename S>
TensorT<S> leaky_relu(const TensorT<S>& x, S slope) {
  std::vector<S> v(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    S xi = x.at(i);
    v[i] = xi >= S(0) ? xi : slope * xi;
  }
  return TensorT<S>::op_result(x.shape(), std::move(v), {x.node()}, [slope](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * (p.value[i] >= S(0) ? S(1) : slope);
  });
}

// Heaviside forward (fires at x >= 0), arctanspike surrogate backward.
template <typename S>
TensorT<S> spike_step(const TensorT<S>& x, S a) {
  if (!(a > S(0))) throw validation_error("spike_step: surrogate slope a must be > 0");
  std::vector<S> v(static_cast<std::size_t>(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) v[i] = x.at(i) >= S(0) ? S(1) : S(0);
  return TensorT<S>::op_result(x.shape(), std::move(v), {x.node()}, [a](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      S xi = p.value[i];
      p.grad[i] += self.grad[i] / (S(1) + a * xi * xi);
    }
  });
}

template <typename S>
TensorT<S> sum_all(const TensorT<S>& x) {
  S acc = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) acc += x.at(i);
  return TensorT<S>::op_result(Shape{}, {acc}, {x.node()}, [](TensorNode<S>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
  });
}

// Per-channel vector {C} replicated over HxW; gradient sums back per channel.
template <typename S>
TensorT<S> broadcast_channels(const TensorT<S>& v, int h, int w) {
  if (v.shape().rank() != 1) throw shape_error("broadcast_channels: expected rank-1, got " + v.shape().str());
  const int c = v.shape()[0];
  std::vector<S> out(static_cast<std::size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch) {
    S val = v.at(ch);
    S* plane = out.data() + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < h * w; ++i) plane[i] = val;
  }
  return TensorT<S>::op_result(Shape{c, h, w}, std::move(out), {v.node()},
                               [c, h, w](TensorNode<S>& self) {
                                 auto& p = *self.parents[0];
                                 if (!p.requires_grad) return;
                                 p.ensure_grad();
                                 for (int ch = 0; ch < c; ++ch) {
                                   S acc = 0;
                                   const S* g = self.grad.data() + static_cast<std::size_t>(ch) * h * w;
                                   for (int i = 0; i < h * w; ++i) acc += g[i];
                                   p.grad[ch] += acc;
                                 }
                               });
}

// ---------------------------------------------------------------------------
// structured ops

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int padding) {
  if (x.shape().rank() != 3) throw shape_error("conv2d: input must be CxHxW, got " + x.shape().str());
  if (w.shape().rank() != 4) throw shape_error("conv2d: weight must be OxCxKxK, got " + w.shape().str());
  if (b.shape().rank() != 1) throw shape_error("conv2d: bias must be rank-1, got " + b.shape().str());
  const int c = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
  const int o = w.shape()[0], k = w.shape()[2];
  if (w.shape()[1] != c)
    throw shape_error("conv2d: input channels " + std::to_string(c) +
                      " != weight input channels " + std::to_string(w.shape()[1]));
  if (w.shape()[3] != k) throw shape_error("conv2d: non-square kernel " + w.shape().str());
  if (k % 2 == 0) throw shape_error("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (padding != (k - 1) / 2)
    throw shape_error("conv2d: padding " + std::to_string(padding) + " must equal (K-1)/2 = " +
                      std::to_string((k - 1) / 2));
  if (b.shape()[0] != o)
    throw shape_error("conv2d: bias length " + std::to_string(b.shape()[0]) +
                      " != output channels " + std::to_string(o));

  kernels::ConvDims dims{c, h, wd, o, k, padding};
  std::vector<S> out(static_cast<std::size_t>(o) * h * wd);
  kernels::par::conv2d_forward<S>(dims, x.value().data(), w.value().data(), b.value().data(),
                                  out.data());
  return TensorT<S>::op_result(
      Shape{o, h, wd}, std::move(out), {x.node(), w.node(), b.node()},
      [dims](TensorNode<S>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        if (px.requires_grad) {
          px.ensure_grad();
          kernels::par::conv2d_backward_input<S>(dims, self.grad.data(), pw.value.data(),
                                                 px.grad.data());
        }
        if (pw.requires_grad || pb.requires_grad) {
          pw.ensure_grad();
          pb.ensure_grad();
          kernels::par::conv2d_backward_weight<S>(dims, self.grad.data(), px.value.data(),
                                                  pw.grad.data(), pb.grad.data());
        }
      });
}

template <typename S>
TensorT<S> avg_pool2(const TensorT<S>& x) {
  if (x.shape().rank() != 3) throw shape_error("avg_pool2: input must be CxHxW, got " + x.shape().str());
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (h % 2 || w % 2)
    throw shape_error("avg_pool2: spatial extents must be even, got " + std::to_string(h) + "x" +
                      std::to_string(w));
  const int oh = h / 2, ow = w / 2;
  std::vector<S> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        const S* p = x.value().data() + (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
        out[(static_cast<std::size_t>(ch) * oh + y) * ow + xx] =
            (p[0] + p[1] + p[w] + p[w + 1]) * S(0.25);
      }
  return TensorT<S>::op_result(Shape{c, oh, ow}, std::move(out), {x.node()},
                               [c, h, w, oh, ow](TensorNode<S>& self) {
                                 auto& p = *self.parents[0];
                                 if (!p.requires_grad) return;
                                 p.ensure_grad();
                                 for (int ch = 0; ch < c; ++ch)
                                   for (int y = 0; y < oh; ++y)
                                     for (int xx = 0; xx < ow; ++xx) {
                                       S g = self.grad[(static_cast<std::size_t>(ch) * oh + y) * ow + xx] * S(0.25);
                                       S* gp = p.grad.data() +
                                               (static_cast<std::size_t>(ch) * h + 2 * y) * w + 2 * xx;
                                       gp[0] += g;
                                       gp[1] += g;
                                       gp[w] += g;
                                       gp[w + 1] += g;
                                     }
                               });
}

namespace detail {

struct LerpTap {
  int i0, i1;
  float f;
};

inline std::vector<LerpTap> bilinear_taps(int out_n, int in_n) {
  std::vector<LerpTap> taps(out_n);
  for (int o = 0; o < out_n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    int lo = static_cast<int>(std::floor(src));
    double f = src - lo;
    int i0 = std::clamp(lo, 0, in_n - 1);
    int i1 = std::clamp(lo + 1, 0, in_n - 1);
    taps[o] = {i0, i1, static_cast<float>(f)};
  }
  return taps;
}

}  // namespace detail

// x2 bilinear upsampling, align_corners=false.
template <typename S>
TensorT<S> upsample_bilinear2(const TensorT<S>& x) {
  if (x.shape().rank() != 3)
    throw shape_error("upsample_bilinear2: input must be CxHxW, got " + x.shape().str());
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int oh = 2 * h, ow = 2 * w;
  auto ty = detail::bilinear_taps(oh, h);
  auto tx = detail::bilinear_taps(ow, w);
  std::vector<S> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    const S* plane = x.value().data() + static_cast<std::size_t>(ch) * h * w;
    S* oplane = out.data() + static_cast<std::size_t>(ch) * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        const auto& a = ty[y];
        const auto& b = tx[xx];
        S v00 = plane[a.i0 * w + b.i0], v01 = plane[a.i0 * w + b.i1];
        S v10 = plane[a.i1 * w + b.i0], v11 = plane[a.i1 * w + b.i1];
        S top = v00 + S(b.f) * (v01 - v00);
        S bot = v10 + S(b.f) * (v11 - v10);
        oplane[y * ow + xx] = top + S(a.f) * (bot - top);
      }
  }
  return TensorT<S>::op_result(
      Shape{c, oh, ow}, std::move(out), {x.node()}, [c, h, w, oh, ow, ty, tx](TensorNode<S>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
          S* gplane = p.grad.data() + static_cast<std::size_t>(ch) * h * w;
          const S* g = self.grad.data() + static_cast<std::size_t>(ch) * oh * ow;
          for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
              const auto& a = ty[y];
              const auto& b = tx[xx];
              S gv = g[y * ow + xx];
              S fy = S(a.f), fx = S(b.f);
              gplane[a.i0 * w + b.i0] += gv * (S(1) - fy) * (S(1) - fx);
              gplane[a.i0 * w + b.i1] += gv * (S(1) - fy) * fx;
              gplane[a.i1 * w + b.i0] += gv * fy * (S(1) - fx);
              gplane[a.i1 * w + b.i1] += gv * fy * fx;
            }
        }
      });
}

// Nearest-neighbour upsampling to an explicit integer-multiple target size.
template <typename S>
TensorT<S> upsample_nearest(const TensorT<S>& x, int out_h, int out_w) {
  if (x.shape().rank() != 3)
    throw shape_error("upsample_nearest: input must be CxHxW, got " + x.shape().str());
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (out_h < h || out_w < w || out_h % h || out_w % w)
    throw shape_error("upsample_nearest: target " + std::to_string(out_h) + "x" +
                      std::to_string(out_w) + " is not an integer upscale of " + std::to_string(h) +
                      "x" + std::to_string(w));
  const int sy = out_h / h, sx = out_w / w;
  std::vector<S> out(static_cast<std::size_t>(c) * out_h * out_w);
  for (int ch = 0; ch < c; ++ch) {
    const S* plane = x.value().data() + static_cast<std::size_t>(ch) * h * w;
    S* oplane = out.data() + static_cast<std::size_t>(ch) * out_h * out_w;
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx) oplane[y * out_w + xx] = plane[(y / sy) * w + xx / sx];
  }
  return TensorT<S>::op_result(Shape{c, out_h, out_w}, std::move(out), {x.node()},
                               [c, h, w, out_h, out_w, sy, sx](TensorNode<S>& self) {
                                 auto& p = *self.parents[0];
                                 if (!p.requires_grad) return;
                                 p.ensure_grad();
                                 for (int ch = 0; ch < c; ++ch) {
                                   S* gplane = p.grad.data() + static_cast<std::size_t>(ch) * h * w;
                                   const S* g =
                                       self.grad.data() + static_cast<std::size_t>(ch) * out_h * out_w;
                                   for (int y = 0; y < out_h; ++y)
                                     for (int xx = 0; xx < out_w; ++xx)
                                       gplane[(y / sy) * w + xx / sx] += g[y * out_w + xx];
                                 }
                               });
}

template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape().rank() != 3 || b.shape().rank() != 3)
    throw shape_error("concat_channels: inputs must be CxHxW");
  const int ca = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
  const int cb = b.shape()[0];
  if (b.shape()[1] != h || b.shape()[2] != w)
    throw shape_error("concat_channels: spatial mismatch " + a.shape().str() + " vs " +
                      b.shape().str());
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(ca + cb) * h * w);
  out.insert(out.end(), a.value().begin(), a.value().end());
  out.insert(out.end(), b.value().begin(), b.value().end());
  const std::size_t na = static_cast<std::size_t>(ca) * h * w;
  return TensorT<S>::op_result(Shape{ca + cb, h, w}, std::move(out), {a.node(), b.node()},
                               [na](TensorNode<S>& self) {
                                 auto& pa = *self.parents[0];
                                 auto& pb = *self.parents[1];
                                 if (pa.requires_grad) {
                                   pa.ensure_grad();
                                   for (std::size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
                                 }
                                 if (pb.requires_grad) {
                                   pb.ensure_grad();
                                   for (std::size_t i = na; i < self.grad.size(); ++i)
                                     pb.grad[i - na] += self.grad[i];
                                 }
                               });
}

}  // namespace flowspike
