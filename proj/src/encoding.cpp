#include "flowspike/encoding.hpp"

namespace flowspike {

std::vector<EventWindow> slice_windows(const std::vector<Event>& stream, std::int64_t window_us,
                                       int width, int height) {
  if (window_us <= 0) throw validation_error("slice_windows: window width must be positive");
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (stream[i].t < stream[i - 1].t)
      throw validation_error("slice_windows: unordered stream, event " + std::to_string(i) +
                             " at t=" + std::to_string(stream[i].t) + " follows t=" +
                             std::to_string(stream[i - 1].t));

  std::vector<EventWindow> out;
  if (stream.empty()) return out;

  const std::int64_t last_k = stream.back().t / window_us;
  out.reserve(static_cast<std::size_t>(last_k) + 1);
  std::size_t i = 0;
  for (std::int64_t k = 0; k <= last_k; ++k) {
    EventWindow w;
    w.t0 = k * window_us;
    w.t1 = (k + 1) * window_us;
    w.width = width;
    w.height = height;
    while (i < stream.size() && stream[i].t < w.t1) w.events.push_back(stream[i++]);
    out.push_back(std::move(w));
  }
  return out;
}

Tensor count_encode(const EventWindow& w) {
  Tensor t = Tensor::zeros(Shape{2, w.height, w.width});
  auto v = t.value_mut();
  const std::size_t plane = static_cast<std::size_t>(w.height) * w.width;
  for (const Event& e : w.events) {
    std::size_t idx = static_cast<std::size_t>(e.y) * w.width + e.x;
    v[(e.p > 0 ? 0 : plane) + idx] += 1.0f;
  }
  return t;
}

Tensor voxel_encode(const EventWindow& w, int bins) {
  if (bins < 2) throw validation_error("voxel_encode: bins must be >= 2");
  if (w.t1 <= w.t0) throw validation_error("voxel_encode: window must have t1 > t0");
  Tensor t = Tensor::zeros(Shape{bins, w.height, w.width});
  auto v = t.value_mut();
  const std::size_t plane = static_cast<std::size_t>(w.height) * w.width;
  const double span = static_cast<double>(w.t1 - w.t0);
  for (const Event& e : w.events) {
    double tau = static_cast<double>(e.t - w.t0) / span * (bins - 1);
    int b0 = static_cast<int>(tau);  // tau in [0, bins-1)
    float f = static_cast<float>(tau - b0);
    std::size_t idx = static_cast<std::size_t>(e.y) * w.width + e.x;
    v[static_cast<std::size_t>(b0) * plane + idx] += e.p * (1.0f - f);
    if (b0 + 1 < bins) v[static_cast<std::size_t>(b0 + 1) * plane + idx] += e.p * f;
  }
  return t;
}

}  // namespace flowspike
