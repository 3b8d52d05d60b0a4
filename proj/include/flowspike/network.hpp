#pragma once

// Timelens-style spiking encoder/decoder. The first stage holds two 7x7
// spiking convolutions followed by 2x2 average pooling; each encoding block
// keeps channels in its first convolution and doubles them in the second
// (5x5 kernels in the first block, 3x3 after), then pools; n_stages+1
// decoding blocks mirror the pools with x2 bilinear upsampling, halving
// channels until base width, with the matching encoder activation
// concatenated before each block's second convolution. A 1x1 tanh head maps
// base channels to (u, v), scaled by max_flow.
//
// Recurrency patterns place a 1x1 recurrent convolution on the first (R*),
// second (*R), both (RR) or neither (FF) convolution of the initial stage
// and every encoding block. Decoders are feed-forward.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowspike/neurons.hpp"
#include "flowspike/tensor.hpp"

namespace flowspike {

enum class Recurrency { RF, FR, RR, FF };

inline const char* to_string(Recurrency r) {
  switch (r) {
    case Recurrency::RF: return "RF";
    case Recurrency::FR: return "FR";
    case Recurrency::RR: return "RR";
    case Recurrency::FF: return "FF";
  }
  return "?";
}

inline Recurrency recurrency_from(const std::string& s) {
  if (s == "RF") return Recurrency::RF;
  if (s == "FR") return Recurrency::FR;
  if (s == "RR") return Recurrency::RR;
  if (s == "FF") return Recurrency::FF;
  throw validation_error("unknown recurrency pattern '" + s + "' (expected RF, FR, RR or FF)");
}

struct ArchConfig {
  int n_in = 6;
  int base_channels = 32;
  int n_stages = 5;  // encoding/decoding block pairs, 2..5
  Recurrency recurrency = Recurrency::RF;
  NeuronKind neuron_kind = NeuronKind::SNU;
  bool multi_res_loss = false;
  float max_flow = 32.0f;  // head scale, pixels per aggregation window

  void validate() const {
    if (n_in < 1) throw validation_error("arch: n_in must be >= 1");
    if (base_channels < 1) throw validation_error("arch: base_channels must be >= 1");
    if (n_stages < 2 || n_stages > 5)
      throw validation_error("arch: n_stages must be in 2..5, got " + std::to_string(n_stages));
    if (!(max_flow > 0)) throw validation_error("arch: max_flow must be positive");
  }
};

// One spiking convolution: feed-forward conv + optional 1x1 recurrent conv
// + neuron dynamics (+ SNUo 1x1 modulation convs, b_o as mod bias).
template <typename S>
struct SpikingConvT {
  TensorT<S> w, b;
  TensorT<S> rec_w, rec_b;        // defined iff recurrent
  TensorT<S> mod_w, mod_b;        // defined iff SNUo
  TensorT<S> mod_rec_w;           // defined iff SNUo and recurrent (no own bias)
  TensorT<S> mod_zero_b;          // constant zero bias for mod_rec conv
  NeuronParamsT<S> neuron;
  int pad = 0;
  bool recurrent = false;

  TensorT<S> step(const TensorT<S>& x) {
    auto drive = conv2d(x, w, b, pad);
    TensorT<S> rec;
    if (recurrent) rec = conv2d(state.y_prev, rec_w, rec_b, 0);
    switch (neuron.kind) {
      case NeuronKind::SNU: {
        auto [y, next] = snu_step(drive, rec, state, neuron);
        state = next;
        return y;
      }
      case NeuronKind::sSNU: {
        auto [y, next] = ssnu_step(drive, rec, state, neuron);
        state = next;
        return y;
      }
      case NeuronKind::SNUo: {
        auto mod_drive = conv2d(x, mod_w, mod_b, 0);
        TensorT<S> mod_rec;
        if (recurrent) mod_rec = conv2d(state.y_prev, mod_rec_w, mod_zero_b, 0);
        auto [y, next] = snuo_step(drive, rec, mod_drive, mod_rec, state, neuron);
        state = next;
        return y;
      }
    }
    throw validation_error("unreachable neuron kind");
  }

  CellStateT<S> state;
};

template <typename S>
struct NamedParam {
  std::string name;
  TensorT<S> tensor;  // shares storage with the model
};

template <typename S>
struct ModelT {
  ArchConfig config;
  int height = 0, width = 0;

  SpikingConvT<S> init0, init1;
  struct EncBlock {
    SpikingConvT<S> c0, c1;
  };
  struct DecBlock {
    SpikingConvT<S> c0, c1;
    TensorT<S> flow_w, flow_b;  // multi-res prediction head (all but last block)
  };
  std::vector<EncBlock> enc;
  std::vector<DecBlock> dec;
  TensorT<S> head_w, head_b;

  std::vector<NamedParam<S>> parameters();
  ModelT clone() const;
};

template <typename S>
struct ForwardOut {
  TensorT<S> flow;                          // 2xHxW, values in (-max_flow, max_flow)
  std::vector<TensorT<S>> intermediates;    // multi-res only, upsampled to HxW
};

// Optional per-layer tap used by the profiling module.
template <typename S>
using LayerProbe = std::function<void(const std::string&, const TensorT<S>&)>;

namespace detail {

template <typename S>
TensorT<S> conv_init(int out_c, int in_c, int k, Rng& rng) {
  double bound = std::sqrt(6.0 / (static_cast<double>(in_c) * k * k));
  auto t = TensorT<S>::uniform(Shape{out_c, in_c, k, k}, static_cast<S>(-bound),
                               static_cast<S>(bound), rng);
  t.set_requires_grad(true);
  return t;
}

template <typename S>
TensorT<S> zero_bias(int out_c, bool trainable = true) {
  auto t = TensorT<S>::zeros(Shape{out_c});
  t.set_requires_grad(trainable);
  return t;
}

template <typename S>
SpikingConvT<S> make_layer(int in_c, int out_c, int k, bool recurrent, NeuronKind kind, int h,
                           int w, Rng& rng) {
  SpikingConvT<S> l;
  l.pad = (k - 1) / 2;
  l.recurrent = recurrent;
  l.w = conv_init<S>(out_c, in_c, k, rng);
  l.b = zero_bias<S>(out_c);
  if (recurrent) {
    l.rec_w = conv_init<S>(out_c, out_c, 1, rng);
    l.rec_b = zero_bias<S>(out_c);
  }
  if (kind == NeuronKind::SNUo) {
    l.mod_w = conv_init<S>(out_c, in_c, 1, rng);
    l.mod_b = zero_bias<S>(out_c);
    if (recurrent) l.mod_rec_w = conv_init<S>(out_c, out_c, 1, rng);
    l.mod_zero_b = TensorT<S>::zeros(Shape{out_c});  // not trainable
  }
  l.neuron = NeuronParamsT<S>::init(out_c, kind);
  l.state = CellStateT<S>::zeros(out_c, h, w, kind);
  return l;
}

template <typename S>
void collect_layer(std::vector<NamedParam<S>>& out, const std::string& name, SpikingConvT<S>& l) {
  out.push_back({name + ".w", l.w});
  out.push_back({name + ".b", l.b});
  if (l.recurrent) {
    out.push_back({name + ".rec_w", l.rec_w});
    out.push_back({name + ".rec_b", l.rec_b});
  }
  if (l.mod_w.defined()) {
    out.push_back({name + ".mod_w", l.mod_w});
    out.push_back({name + ".mod_b", l.mod_b});
    if (l.mod_rec_w.defined()) out.push_back({name + ".mod_rec_w", l.mod_rec_w});
  }
  out.push_back({name + ".d_raw", l.neuron.d_raw});
  out.push_back({name + ".v_th", l.neuron.v_th});
}

}  // namespace detail

template <typename S>
std::vector<NamedParam<S>> ModelT<S>::parameters() {
  std::vector<NamedParam<S>> out;
  detail::collect_layer(out, "init.c0", init0);
  detail::collect_layer(out, "init.c1", init1);
  for (std::size_t k = 0; k < enc.size(); ++k) {
    std::string base = "enc" + std::to_string(k + 1);
    detail::collect_layer(out, base + ".c0", enc[k].c0);
    detail::collect_layer(out, base + ".c1", enc[k].c1);
  }
  for (std::size_t j = 0; j < dec.size(); ++j) {
    std::string base = "dec" + std::to_string(j + 1);
    detail::collect_layer(out, base + ".c0", dec[j].c0);
    detail::collect_layer(out, base + ".c1", dec[j].c1);
    if (dec[j].flow_w.defined()) {
      out.push_back({base + ".flow.w", dec[j].flow_w});
      out.push_back({base + ".flow.b", dec[j].flow_b});
    }
  }
  out.push_back({"head.w", head_w});
  out.push_back({"head.b", head_b});
  return out;
}

template <typename S>
ModelT<S> build(const ArchConfig& config, int height, int width, std::uint64_t seed = 1) {
  config.validate();
  const int S_ = config.n_stages;
  const int div = 1 << (S_ + 1);
  if (height % div || width % div || height < div || width < div)
    throw shape_error("build: input " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be divisible by 2^(n_stages+1) = " + std::to_string(div));

  Rng rng(seed ^ 0xf10c5e1eull);
  ModelT<S> m;
  m.config = config;
  m.height = height;
  m.width = width;

  const bool r0 = config.recurrency == Recurrency::RF || config.recurrency == Recurrency::RR;
  const bool r1 = config.recurrency == Recurrency::FR || config.recurrency == Recurrency::RR;
  const NeuronKind kind = config.neuron_kind;
  const int B = config.base_channels;

  int h = height, w = width;
  m.init0 = detail::make_layer<S>(config.n_in, B, 7, r0, kind, h, w, rng);
  m.init1 = detail::make_layer<S>(B, B, 7, r1, kind, h, w, rng);
  h /= 2;
  w /= 2;

  int c = B;
  for (int k = 1; k <= S_; ++k) {
    const int ks = k == 1 ? 5 : 3;
    typename ModelT<S>::EncBlock blk;
    blk.c0 = detail::make_layer<S>(c, c, ks, r0, kind, h, w, rng);
    blk.c1 = detail::make_layer<S>(c, 2 * c, ks, r1, kind, h, w, rng);
    m.enc.push_back(std::move(blk));
    c *= 2;
    h /= 2;
    w /= 2;
  }

  for (int j = 1; j <= S_ + 1; ++j) {
    h *= 2;
    w *= 2;
    const int out_c = j <= S_ ? c / 2 : B;
    const int skip_c = (1 << (S_ + 1 - j)) * B;  // pre-pool encoder activation
    const int in_c = c + (config.multi_res_loss && j >= 2 ? 2 : 0);
    typename ModelT<S>::DecBlock blk;
    blk.c0 = detail::make_layer<S>(in_c, out_c, 3, false, kind, h, w, rng);
    blk.c1 = detail::make_layer<S>(out_c + skip_c, out_c, 3, false, kind, h, w, rng);
    if (config.multi_res_loss && j <= S_) {
      blk.flow_w = detail::conv_init<S>(2, out_c, 1, rng);
      blk.flow_b = detail::zero_bias<S>(2);
    }
    m.dec.push_back(std::move(blk));
    c = out_c;
  }

  m.head_w = detail::conv_init<S>(2, B, 1, rng);
  m.head_b = detail::zero_bias<S>(2);
  return m;
}

template <typename S>
ForwardOut<S> forward(ModelT<S>& m, const TensorT<S>& input, const LayerProbe<S>* probe = nullptr) {
  if (input.shape().rank() != 3 || input.shape()[0] != m.config.n_in ||
      input.shape()[1] != m.height || input.shape()[2] != m.width)
    throw shape_error("forward: input " + input.shape().str() + ", model expects " +
                      std::to_string(m.config.n_in) + "x" + std::to_string(m.height) + "x" +
                      std::to_string(m.width));
  auto tap = [&](const std::string& name, const TensorT<S>& t) {
    if (probe) (*probe)(name, t);
  };

  tap("input", input);
  auto a = m.init0.step(input);
  tap("conv0", a);
  a = m.init1.step(a);
  tap("conv1", a);

  std::vector<TensorT<S>> skips{a};
  a = avg_pool2(a);
  for (std::size_t k = 0; k < m.enc.size(); ++k) {
    a = m.enc[k].c0.step(a);
    a = m.enc[k].c1.step(a);
    tap("s" + std::to_string(k + 1), a);
    skips.push_back(a);
    a = avg_pool2(a);
  }

  const S max_flow = static_cast<S>(m.config.max_flow);
  ForwardOut<S> out;
  TensorT<S> prev_flow;
  for (std::size_t j = 0; j < m.dec.size(); ++j) {
    if (prev_flow.defined()) a = concat_channels(a, prev_flow);
    a = upsample_bilinear2(a);
    a = m.dec[j].c0.step(a);
    a = concat_channels(a, skips[skips.size() - 1 - j]);
    a = m.dec[j].c1.step(a);
    tap("u" + std::to_string(j + 1), a);
    if (m.dec[j].flow_w.defined()) {
      auto f = scale(vtanh(conv2d(a, m.dec[j].flow_w, m.dec[j].flow_b, 0)), max_flow);
      out.intermediates.push_back(upsample_nearest(f, m.height, m.width));
      prev_flow = f;
    } else {
      prev_flow = TensorT<S>();
    }
  }

  out.flow = scale(vtanh(conv2d(a, m.head_w, m.head_b, 0)), max_flow);
  tap("pred", out.flow);
  return out;
}

template <typename S>
std::int64_t param_count(ModelT<S>& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.tensor.numel();
  return n;
}

template <typename S>
void detach_states(ModelT<S>& m) {
  m.init0.state.detach();
  m.init1.state.detach();
  for (auto& b : m.enc) {
    b.c0.state.detach();
    b.c1.state.detach();
  }
  for (auto& b : m.dec) {
    b.c0.state.detach();
    b.c1.state.detach();
  }
}

template <typename S>
void reset_states(ModelT<S>& m) {
  m.init0.state = reset_state(m.init0.state);
  m.init1.state = reset_state(m.init1.state);
  for (auto& b : m.enc) {
    b.c0.state = reset_state(b.c0.state);
    b.c1.state = reset_state(b.c1.state);
  }
  for (auto& b : m.dec) {
    b.c0.state = reset_state(b.c0.state);
    b.c1.state = reset_state(b.c1.state);
  }
}

template <typename S>
ModelT<S> ModelT<S>::clone() const {
  ModelT<S> copy = *this;  // copies handles; now deep-copy every tensor
  auto dup = [](TensorT<S>& t, bool grad) {
    if (!t.defined()) return;
    bool rg = t.requires_grad() || grad;
    t = t.detached();
    t.set_requires_grad(rg);
  };
  auto dup_layer = [&](SpikingConvT<S>& l) {
    dup(l.w, true);
    dup(l.b, true);
    dup(l.rec_w, true);
    dup(l.rec_b, true);
    dup(l.mod_w, true);
    dup(l.mod_b, true);
    dup(l.mod_rec_w, true);
    if (l.mod_zero_b.defined()) l.mod_zero_b = l.mod_zero_b.detached();
    dup(l.neuron.d_raw, true);
    dup(l.neuron.v_th, true);
    l.state = reset_state(l.state);
  };
  dup_layer(copy.init0);
  dup_layer(copy.init1);
  for (auto& b : copy.enc) {
    dup_layer(b.c0);
    dup_layer(b.c1);
  }
  for (auto& b : copy.dec) {
    dup_layer(b.c0);
    dup_layer(b.c1);
    dup(b.flow_w, true);
    dup(b.flow_b, true);
  }
  dup(copy.head_w, true);
  dup(copy.head_b, true);
  return copy;
}

using Model = ModelT<float>;

// Checkpoint container ("SNUC", version 1): JSON config sidecar followed by
// named little-endian float32 tensors. Bit-exact round trip.
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace flowspike
