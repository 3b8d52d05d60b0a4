#pragma once

// Stateful spiking cells applied per pixel, per channel on convolutional
// drive. SNU: leaky integrate-and-fire with gated membrane reset and a step
// output (arctanspike surrogate in the backward pass). SNUo: adds axo-axonic
// output modulation producing graded spikes in [0,1]. sSNU: step replaced by
// sigmoid, smooth end to end.

#include <string>

#include "flowspike/tensor.hpp"

namespace flowspike {

enum class NeuronKind { SNU, SNUo, sSNU };

inline const char* to_string(NeuronKind k) {
  switch (k) {
    case NeuronKind::SNU: return "SNU";
    case NeuronKind::SNUo: return "SNUo";
    case NeuronKind::sSNU: return "sSNU";
  }
  return "?";
}

inline NeuronKind neuron_kind_from(const std::string& s) {
  if (s == "SNU") return NeuronKind::SNU;
  if (s == "SNUo") return NeuronKind::SNUo;
  if (s == "sSNU") return NeuronKind::sSNU;
  throw validation_error("unknown neuron kind '" + s + "' (expected SNU, SNUo or sSNU)");
}

constexpr float kSurrogateSlope = 10.0f;  // arctanspike a
constexpr float kModLeak = 0.1f;          // SNUo leaky ReLU slope

template <typename S>
struct NeuronParamsT {
  TensorT<S> d_raw;  // per channel; effective decay d = sigmoid(d_raw) in (0,1)
  TensorT<S> v_th;   // per channel firing threshold
  NeuronKind kind = NeuronKind::SNU;

  static NeuronParamsT init(int channels, NeuronKind kind) {
    NeuronParamsT p;
    p.kind = kind;
    // sigmoid(d_raw) = 0.9
    p.d_raw = TensorT<S>::full(Shape{channels}, static_cast<S>(std::log(9.0)));
    p.v_th = TensorT<S>::full(Shape{channels},
                              kind == NeuronKind::SNUo ? S(0.5) : S(1.0));
    p.d_raw.set_requires_grad(true);
    p.v_th.set_requires_grad(true);
    return p;
  }
};

template <typename S>
struct CellStateT {
  TensorT<S> s;             // membrane potential, layer output shape
  TensorT<S> y_prev;        // previous output (recurrent drive + reset gate)
  TensorT<S> y_tilde_prev;  // SNUo only: previous unmodulated output

  static CellStateT zeros(int c, int h, int w, NeuronKind kind) {
    CellStateT st;
    st.s = TensorT<S>::zeros(Shape{c, h, w});
    st.y_prev = TensorT<S>::zeros(Shape{c, h, w});
    if (kind == NeuronKind::SNUo) st.y_tilde_prev = TensorT<S>::zeros(Shape{c, h, w});
    return st;
  }

  void detach() {
    s = s.detached();
    y_prev = y_prev.detached();
    if (y_tilde_prev.defined()) y_tilde_prev = y_tilde_prev.detached();
  }
};

// Zeroed state with no graph history; shapes preserved.
template <typename S>
CellStateT<S> reset_state(const CellStateT<S>& st) {
  CellStateT<S> out;
  out.s = TensorT<S>::zeros(st.s.shape());
  out.y_prev = TensorT<S>::zeros(st.y_prev.shape());
  if (st.y_tilde_prev.defined()) out.y_tilde_prev = TensorT<S>::zeros(st.y_tilde_prev.shape());
  return out;
}

namespace detail {

template <typename S>
void check_drive(const TensorT<S>& drive, const CellStateT<S>& st, const char* op) {
  if (drive.shape() != st.s.shape())
    throw shape_error(std::string(op) + ": drive shape " + drive.shape().str() +
                      " does not match state shape " + st.s.shape().str());
}

// d broadcast over pixels, and the gated carry d * s_{t-1} * (1 - y_gate)
template <typename S>
TensorT<S> membrane_carry(const TensorT<S>& d_raw, const CellStateT<S>& st,
                          const TensorT<S>& y_gate, int h, int w) {
  auto d = broadcast_channels(sigmoid(d_raw), h, w);
  return mul(d, mul(st.s, affine(y_gate, S(-1), S(1))));
}

}  // namespace detail

// Eq. s_t = (1-d)(drive + rec) + d s_{t-1} (1-y_{t-1}); y_t = step(s_t - v_th)
template <typename S>
std::pair<TensorT<S>, CellStateT<S>> snu_step(const TensorT<S>& drive, const TensorT<S>& rec_drive,
                                              const CellStateT<S>& state,
                                              const NeuronParamsT<S>& params) {
  detail::check_drive(drive, state, "snu_step");
  const int h = drive.shape()[1], w = drive.shape()[2];
  auto inp = rec_drive.defined() ? add(drive, rec_drive) : drive;
  auto one_minus_d = broadcast_channels(affine(sigmoid(params.d_raw), S(-1), S(1)), h, w);
  auto s_t = add(mul(one_minus_d, inp), detail::membrane_carry(params.d_raw, state, state.y_prev, h, w));
  auto y = spike_step(sub(s_t, broadcast_channels(params.v_th, h, w)), static_cast<S>(kSurrogateSlope));
  CellStateT<S> next;
  next.s = s_t;
  next.y_prev = y;
  return {y, next};
}

// sSNU: identical dynamics, sigmoid output; the real-valued y gates the reset.
template <typename S>
std::pair<TensorT<S>, CellStateT<S>> ssnu_step(const TensorT<S>& drive, const TensorT<S>& rec_drive,
                                               const CellStateT<S>& state,
                                               const NeuronParamsT<S>& params) {
  detail::check_drive(drive, state, "ssnu_step");
  const int h = drive.shape()[1], w = drive.shape()[2];
  auto inp = rec_drive.defined() ? add(drive, rec_drive) : drive;
  auto one_minus_d = broadcast_channels(affine(sigmoid(params.d_raw), S(-1), S(1)), h, w);
  auto s_t = add(mul(one_minus_d, inp), detail::membrane_carry(params.d_raw, state, state.y_prev, h, w));
  auto y = sigmoid(sub(s_t, broadcast_channels(params.v_th, h, w)));
  CellStateT<S> next;
  next.s = s_t;
  next.y_prev = y;
  return {y, next};
}

// SNUo: s_t = g(drive + rec + d s_{t-1} (1 - y~_{t-1})), g = leaky ReLU(0.1);
// y~_t = step(s_t - v_th); y_t = y~_t * sigmoid(mod_drive + mod_rec). The
// modulation bias b_o is owned by the layer's modulation convolution, so it
// arrives inside mod_drive.
template <typename S>
std::pair<TensorT<S>, CellStateT<S>> snuo_step(const TensorT<S>& drive, const TensorT<S>& rec_drive,
                                               const TensorT<S>& mod_drive,
                                               const TensorT<S>& mod_rec,
                                               const CellStateT<S>& state,
                                               const NeuronParamsT<S>& params) {
  detail::check_drive(drive, state, "snuo_step");
  const int h = drive.shape()[1], w = drive.shape()[2];
  auto inp = rec_drive.defined() ? add(drive, rec_drive) : drive;
  auto s_t = leaky_relu(
      add(inp, detail::membrane_carry(params.d_raw, state, state.y_tilde_prev, h, w)),
      static_cast<S>(kModLeak));
  auto y_tilde =
      spike_step(sub(s_t, broadcast_channels(params.v_th, h, w)), static_cast<S>(kSurrogateSlope));
  auto mod = mod_rec.defined() ? add(mod_drive, mod_rec) : mod_drive;
  auto y = mul(y_tilde, sigmoid(mod));
  CellStateT<S> next;
  next.s = s_t;
  next.y_prev = y;
  next.y_tilde_prev = y_tilde;
  return {y, next};
}

}  // namespace flowspike
