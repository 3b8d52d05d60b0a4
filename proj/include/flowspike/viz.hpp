#pragma once

// Flow rendering: Middlebury color wheel (hue = angle, saturation = magnitude,
// white at zero) plus a sparse arrow-grid overlay showing the strongest flow
// vector per cell.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flowspike/tensor.hpp"

namespace flowspike {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major

  std::uint8_t* px(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
};

// The standard 55-entry piecewise-linear color wheel.
const std::vector<std::array<int, 3>>& flow_color_wheel();

// Color for one flow vector, normalized components in [-1, 1].
std::array<std::uint8_t, 3> flow_color(double fx, double fy);

// max_magnitude <= 0 selects the field's own maximum.
Image flow_to_rgb(const Tensor& flow, float max_magnitude = 0.0f);

// Draws one arrow per cell x cell block for the maximum-magnitude vector in
// that block; zero-flow cells get nothing.
void arrow_grid_overlay(Image& img, const Tensor& flow, int cell = 10);

void write_png(const Image& img, const std::string& path);

}  // namespace flowspike
