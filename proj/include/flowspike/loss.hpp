#pragma once

// Self-supervised contrast-maximization loss. Events are warped by the
// predicted flow to a reference time (window start and end), bilinearly
// splatted into per-polarity average-timestamp images, and the squared
// images, normalized by the occupied-pixel count, are minimized. A
// Charbonnier prior penalizes spatial flow differences.

#include <cmath>
#include <vector>

#include "flowspike/encoding.hpp"
#include "flowspike/tensor.hpp"

namespace flowspike {

enum class WarpRef { Start, End };

constexpr double kCharbEps = 1e-3;  // Charbonnier epsilon; alpha = 0.5

struct WarpedEvent {
  double x = 0, y = 0;  // continuous warped coordinates
  double tau = 0;       // reference-relative normalized timestamp tau'
  int p = 0;
};

namespace detail {

// tau in [0,1) within the window; displacement factor alpha and reference
// timestamp tau' for the chosen reference.
inline void warp_coeffs(const EventWindow& w, const Event& e, WarpRef ref, double& tau,
                        double& alpha, double& tau_ref) {
  tau = static_cast<double>(e.t - w.t0) / static_cast<double>(w.t1 - w.t0);
  if (ref == WarpRef::End) {
    alpha = 1.0 - tau;
    tau_ref = tau;
  } else {
    alpha = -tau;
    tau_ref = 1.0 - tau;
  }
}

}  // namespace detail

// Warped event list for one reference time; flow is sampled at each event's
// integer pixel. Out-of-frame results are kept.
template <typename S>
std::vector<WarpedEvent> warp_events(const TensorT<S>& flow, const EventWindow& w, WarpRef ref) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2 || flow.shape()[1] != w.height ||
      flow.shape()[2] != w.width)
    throw shape_error("warp_events: flow " + flow.shape().str() + " does not match sensor " +
                      std::to_string(w.height) + "x" + std::to_string(w.width));
  const auto v = flow.value();
  const std::size_t plane = static_cast<std::size_t>(w.height) * w.width;
  std::vector<WarpedEvent> out;
  out.reserve(w.events.size());
  for (const Event& e : w.events) {
    double tau, alpha, tau_ref;
    detail::warp_coeffs(w, e, ref, tau, alpha, tau_ref);
    std::size_t idx = static_cast<std::size_t>(e.y) * w.width + e.x;
    double u = static_cast<double>(v[idx]);
    double vv = static_cast<double>(v[plane + idx]);
    out.push_back({e.x + alpha * u, e.y + alpha * vv, tau_ref, e.p});
  }
  return out;
}

template <typename S>
struct TimestampImages {
  TensorT<S> t_plus;     // HxW average tau' of ON events (0 where empty)
  TensorT<S> t_minus;    // HxW average tau' of OFF events
  TensorT<S> occupancy;  // HxW, 1 where any mass was splatted
};

// Bilinear splat of (weight, weight * tau') per polarity; corners falling
// outside the frame are dropped.
template <typename S>
TimestampImages<S> avg_timestamp_images(const std::vector<WarpedEvent>& warped, int h, int w) {
  std::vector<S> mass_p(static_cast<std::size_t>(h) * w, S(0)), sum_p = mass_p;
  std::vector<S> mass_m = mass_p, sum_m = mass_p;
  for (const WarpedEvent& e : warped) {
    const int x0 = static_cast<int>(std::floor(e.x)), y0 = static_cast<int>(std::floor(e.y));
    const double fx = e.x - x0, fy = e.y - y0;
    const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy};
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        int xx = x0 + dx, yy = y0 + dy;
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
        S wt = static_cast<S>(wx[dx] * wy[dy]);
        std::size_t q = static_cast<std::size_t>(yy) * w + xx;
        if (e.p > 0) {
          mass_p[q] += wt;
          sum_p[q] += wt * static_cast<S>(e.tau);
        } else {
          mass_m[q] += wt;
          sum_m[q] += wt * static_cast<S>(e.tau);
        }
      }
  }
  TimestampImages<S> out;
  out.t_plus = TensorT<S>::zeros(Shape{h, w});
  out.t_minus = TensorT<S>::zeros(Shape{h, w});
  out.occupancy = TensorT<S>::zeros(Shape{h, w});
  auto tp = out.t_plus.value_mut(), tm = out.t_minus.value_mut(), oc = out.occupancy.value_mut();
  for (std::size_t q = 0; q < mass_p.size(); ++q) {
    if (mass_p[q] > S(0)) tp[q] = sum_p[q] / mass_p[q];
    if (mass_m[q] > S(0)) tm[q] = sum_m[q] / mass_m[q];
    if (mass_p[q] > S(0) || mass_m[q] > S(0)) oc[q] = S(1);
  }
  return out;
}

// One contrast term, differentiable w.r.t. flow through the splat weights.
template <typename S>
TensorT<S> contrast_term(const TensorT<S>& flow, const EventWindow& w, WarpRef ref) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2 || flow.shape()[1] != w.height ||
      flow.shape()[2] != w.width)
    throw shape_error("contrast_term: flow " + flow.shape().str() + " does not match sensor " +
                      std::to_string(w.height) + "x" + std::to_string(w.width));
  if (w.events.empty()) return TensorT<S>::scalar(S(0));

  const int H = w.height, W = w.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const auto fv = flow.value();

  std::vector<S> mass[2], sum[2];  // [0]=ON, [1]=OFF
  for (int s = 0; s < 2; ++s) {
    mass[s].assign(plane, S(0));
    sum[s].assign(plane, S(0));
  }
  for (const Event& e : w.events) {
    double tau, alpha, tau_ref;
    detail::warp_coeffs(w, e, ref, tau, alpha, tau_ref);
    std::size_t idx = static_cast<std::size_t>(e.y) * W + e.x;
    double px = e.x + alpha * static_cast<double>(fv[idx]);
    double py = e.y + alpha * static_cast<double>(fv[plane + idx]);
    const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy};
    const int s = e.p > 0 ? 0 : 1;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        int xx = x0 + dx, yy = y0 + dy;
        if (xx < 0 || xx >= W || yy < 0 || yy >= H) continue;
        S wt = static_cast<S>(wx[dx] * wy[dy]);
        std::size_t q = static_cast<std::size_t>(yy) * W + xx;
        mass[s][q] += wt;
        sum[s][q] += wt * static_cast<S>(tau_ref);
      }
  }

  std::int64_t occupied = 0;
  S value = 0;
  std::vector<S> t_img[2];
  for (int s = 0; s < 2; ++s) t_img[s].assign(plane, S(0));
  for (std::size_t q = 0; q < plane; ++q) {
    for (int s = 0; s < 2; ++s)
      if (mass[s][q] > S(0)) {
        t_img[s][q] = sum[s][q] / mass[s][q];
        value += t_img[s][q] * t_img[s][q];
      }
    if (mass[0][q] > S(0) || mass[1][q] > S(0)) ++occupied;
  }
  const S n_occ = static_cast<S>(occupied > 0 ? occupied : 1);
  value /= n_occ;

  // Backward re-walks the events; the average-timestamp images and masses
  // are captured. The occupancy count is treated as a constant.
  EventWindow win = w;
  auto back = [win, ref, n_occ, t0 = std::move(t_img[0]), t1 = std::move(t_img[1]),
               m0 = std::move(mass[0]), m1 = std::move(mass[1])](TensorNode<S>& self) {
    auto& pf = *self.parents[0];
    if (!pf.requires_grad) return;
    pf.ensure_grad();
    const int H = win.height, W = win.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const S g = self.grad[0];
    const std::vector<S>* timg[2] = {&t0, &t1};
    const std::vector<S>* mimg[2] = {&m0, &m1};
    for (const Event& e : win.events) {
      double tau, alpha, tau_ref;
      detail::warp_coeffs(win, e, ref, tau, alpha, tau_ref);
      std::size_t idx = static_cast<std::size_t>(e.y) * W + e.x;
      double px = e.x + alpha * static_cast<double>(pf.value[idx]);
      double py = e.y + alpha * static_cast<double>(pf.value[plane + idx]);
      const int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
      const double fx = px - x0, fy = py - y0;
      const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy};
      const double dwx[2] = {-1.0, 1.0};  // d wx / d px
      const int s = e.p > 0 ? 0 : 1;
      double du = 0, dv = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          int xx = x0 + dx, yy = y0 + dy;
          if (xx < 0 || xx >= W || yy < 0 || yy >= H) continue;
          std::size_t q = static_cast<std::size_t>(yy) * W + xx;
          S m = (*mimg[s])[q];
          if (!(m > S(0))) continue;
          S t = (*timg[s])[q];
          // dL/dw = (2 t / n_occ) * (tau' - t) / mass
          double dl_dw = 2.0 * static_cast<double>(t) / static_cast<double>(n_occ) *
                         (tau_ref - static_cast<double>(t)) / static_cast<double>(m);
          du += dl_dw * dwx[dx] * wy[dy] * alpha;
          dv += dl_dw * wx[dx] * dwx[dy] * alpha;
        }
      pf.grad[idx] += static_cast<S>(g * du);
      pf.grad[plane + idx] += static_cast<S>(g * dv);
    }
  };
  return TensorT<S>::op_result(Shape{}, {value}, {flow.node()}, std::move(back));
}

// Forward + backward contrast terms.
template <typename S>
TensorT<S> contrast_loss(const TensorT<S>& flow, const EventWindow& w) {
  return add(contrast_term(flow, w, WarpRef::End), contrast_term(flow, w, WarpRef::Start));
}

// Mean Charbonnier penalty sqrt(d^2 + eps^2) over all 4-neighbour flow
// differences (both channels). 0 for fields with no neighbour pairs.
template <typename S>
TensorT<S> charbonnier_smoothness(const TensorT<S>& flow) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2)
    throw shape_error("charbonnier_smoothness: expected 2xHxW flow, got " + flow.shape().str());
  const int H = flow.shape()[1], W = flow.shape()[2];
  const std::int64_t n_terms = 2ll * (static_cast<std::int64_t>(H) * (W - 1) +
                                      static_cast<std::int64_t>(H - 1) * W);
  if (n_terms == 0) return TensorT<S>::scalar(S(0));
  const S eps2 = static_cast<S>(kCharbEps * kCharbEps);
  const auto v = flow.value();
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  S acc = 0;
  for (int c = 0; c < 2; ++c) {
    const S* p = v.data() + c * plane;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x + 1 < W; ++x) {
        S d = p[y * W + x + 1] - p[y * W + x];
        acc += std::sqrt(d * d + eps2);
      }
    for (int y = 0; y + 1 < H; ++y)
      for (int x = 0; x < W; ++x) {
        S d = p[(y + 1) * W + x] - p[y * W + x];
        acc += std::sqrt(d * d + eps2);
      }
  }
  S value = acc / static_cast<S>(n_terms);

  auto back = [H, W, plane, eps2, n_terms](TensorNode<S>& self) {
    auto& pf = *self.parents[0];
    if (!pf.requires_grad) return;
    pf.ensure_grad();
    const S g = self.grad[0] / static_cast<S>(n_terms);
    for (int c = 0; c < 2; ++c) {
      const S* p = pf.value.data() + c * plane;
      S* gp = pf.grad.data() + c * plane;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
          S d = p[y * W + x + 1] - p[y * W + x];
          S dd = g * d / std::sqrt(d * d + eps2);
          gp[y * W + x + 1] += dd;
          gp[y * W + x] -= dd;
        }
      for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) {
          S d = p[(y + 1) * W + x] - p[y * W + x];
          S dd = g * d / std::sqrt(d * d + eps2);
          gp[(y + 1) * W + x] += dd;
          gp[y * W + x] -= dd;
        }
    }
  };
  return TensorT<S>::op_result(Shape{}, {value}, {flow.node()}, std::move(back));
}

template <typename S>
TensorT<S> total_loss(const TensorT<S>& flow, const EventWindow& w, S lambda = S(0.001)) {
  return add(contrast_loss(flow, w), scale(charbonnier_smoothness(flow), lambda));
}

// Sum of total_loss over every prediction scale (intermediates already
// upsampled to full resolution by the network) plus the final flow.
template <typename S>
TensorT<S> multi_res_loss(const std::vector<TensorT<S>>& flows, const EventWindow& w,
                          S lambda = S(0.001)) {
  if (flows.empty()) throw validation_error("multi_res_loss: empty flow list");
  TensorT<S> acc = total_loss(flows[0], w, lambda);
  for (std::size_t i = 1; i < flows.size(); ++i) acc = add(acc, total_loss(flows[i], w, lambda));
  return acc;
}

}  // namespace flowspike
