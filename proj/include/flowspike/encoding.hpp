#pragma once

// Raw event streams -> network input tensors (count and voxel-grid coding).
// Pure functions, safe to call concurrently.

#include <cstdint>
#include <vector>

#include "flowspike/tensor.hpp"

namespace flowspike {

struct Event {
  int x = 0;           // pixel column
  int y = 0;           // pixel row
  std::int64_t t = 0;  // microseconds, non-negative
  int p = 0;           // polarity, +1 or -1
};

struct EventWindow {
  std::vector<Event> events;  // time-ordered, t0 <= t < t1
  std::int64_t t0 = 0;
  std::int64_t t1 = 0;
  int width = 0;
  int height = 0;
};

// Consecutive half-open windows [k*w, (k+1)*w) covering the stream; empty
// windows between events are included. Throws on an unordered stream,
// naming the first offending event.
std::vector<EventWindow> slice_windows(const std::vector<Event>& stream, std::int64_t window_us,
                                       int width, int height);

// 2xHxW: channel 0 = ON counts, channel 1 = OFF counts.
Tensor count_encode(const EventWindow& w);

// bins x H x W signed voxel grid. Each event lands at
// tau = (t - t0) / (t1 - t0) * (bins - 1) and splits p across the two
// adjacent bins by temporal bilinear interpolation.
Tensor voxel_encode(const EventWindow& w, int bins = 6);

}  // namespace flowspike
