#pragma once

// Synthetic rigid-translation event data: a vertical bar sweeping rightward
// emits an ON event whenever its leading edge crosses a pixel center and an
// OFF event for the trailing edge. Ground-truth flow is (u, 0) pixels per
// window everywhere the bar passes.

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowspike/encoding.hpp"

namespace synthetic {

struct BarParams {
  int width = 16;
  int height = 16;
  int n_windows = 1;
  double u = 2.0;  // pixels per window, rightward
  double x0 = 4.25;  // leading-edge start (off the pixel grid)
  int bar_w = 3;
  std::int64_t window_us = 10000;
};

inline std::vector<flowspike::Event> bar_events(const BarParams& p) {
  std::vector<flowspike::Event> ev;
  auto edge_events = [&](double start_x, int polarity) {
    // pixel-center crossings of an edge moving at u px/window
    const double t_end = p.n_windows;
    for (int m = static_cast<int>(std::ceil(start_x));; ++m) {
      double t = (m - start_x) / p.u;  // window units
      if (t < 0) continue;
      if (t >= t_end) break;
      std::int64_t t_us = static_cast<std::int64_t>(t * p.window_us);
      int x = ((m % p.width) + p.width) % p.width;
      for (int y = 0; y < p.height; ++y) ev.push_back({x, y, t_us, polarity});
    }
  };
  edge_events(p.x0, +1);
  edge_events(p.x0 - p.bar_w, -1);
  std::stable_sort(ev.begin(), ev.end(),
                   [](const flowspike::Event& a, const flowspike::Event& b) { return a.t < b.t; });
  return ev;
}

inline std::vector<flowspike::EventWindow> bar_windows(const BarParams& p) {
  auto ev = bar_events(p);
  auto windows = flowspike::slice_windows(ev, p.window_us, p.width, p.height);
  while (static_cast<int>(windows.size()) < p.n_windows) {
    flowspike::EventWindow w;
    w.t0 = static_cast<std::int64_t>(windows.size()) * p.window_us;
    w.t1 = w.t0 + p.window_us;
    w.width = p.width;
    w.height = p.height;
    windows.push_back(w);
  }
  windows.resize(p.n_windows);
  return windows;
}

// Uniform ground-truth flow (u, 0).
inline flowspike::Tensor bar_gt_flow(const BarParams& p) {
  flowspike::Tensor f = flowspike::Tensor::zeros(flowspike::Shape{2, p.height, p.width});
  auto v = f.value_mut();
  for (int i = 0; i < p.height * p.width; ++i) v[i] = static_cast<float>(p.u);
  return f;
}

}  // namespace synthetic
