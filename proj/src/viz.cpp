#include "flowspike/viz.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>

namespace flowspike {

const std::vector<std::array<int, 3>>& flow_color_wheel() {
  static const std::vector<std::array<int, 3>> wheel = [] {
    // transition lengths of the standard wheel (55 entries)
    const int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<int, 3>> w;
    w.reserve(RY + YG + GC + CB + BM + MR);
    for (int i = 0; i < RY; ++i) w.push_back({255, 255 * i / RY, 0});
    for (int i = 0; i < YG; ++i) w.push_back({255 - 255 * i / YG, 255, 0});
    for (int i =  0; i < GC; ++i) w.push_back({0, 255, 255 * i / GC});
    for (int i = 0; i < CB; ++i) w.push_back({0, 255 - 255 * i / CB, 255});
    for (int i = 0; i < BM; ++i) w.push_back({255 * i / BM, 0, 255});
    for (int i = 0; i < MR; ++i) w.push_back({255, 0, 255 - 255 * i / MR});
    return w;
  }();
  return wheel;
}

std::array<std::uint8_t, 3> flow_color(double fx, double fy) {
  const auto& wheel = flow_color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  double rad = std::sqrt(fx * fx + fy * fy);
  double a = std::atan2(-fy, -fx) / M_PI;  // [-1, 1]
  double fk = (a + 1.0) / 2.0 * (ncols - 1);
  int k0 = static_cast<int>(fk);
  int k1 = (k0 + 1) % ncols;
  double f = fk - k0;
  std::array<std::uint8_t, 3> out;
  for (int b = 0; b < 3; ++b) {
    double col0 = wheel[k0][b] / 255.0;
    double col1 = wheel[k1][b] / 255.0;
    double col = (1.0 - f) * col0 + f * col1;
    if (rad <= 1.0)
      col = 1.0 - rad * (1.0 - col);  // saturate toward white at the center
    else
      col *= 0.75;  // out of range
    out[b] = static_cast<std::uint8_t>(255.0 * col + 0.5);
  }
  return out;
}

Image flow_to_rgb(const Tensor& flow, float max_magnitude) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2)
    throw shape_error("flow_to_rgb: expected 2xHxW, got " + flow.shape().str());
  const int h = flow.shape()[1], w = flow.shape()[2];
  auto v = flow.value();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double max_mag = max_magnitude;
  if (max_mag <= 0) {
    for (std::size_t i = 0; i < plane; ++i) {
      double m = std::sqrt(static_cast<double>(v[i]) * v[i] +
                           static_cast<double>(v[plane + i]) * v[plane + i]);
      max_mag = std::max(max_mag, m);
    }
    if (max_mag <= 0) max_mag = 1.0;
  }

  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(3 * plane);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      auto c = flow_color(v[i] / max_mag, v[plane + i] / max_mag);
      std::uint8_t* p = img.px(x, y);
      p[0] = c[0];
      p[1] = c[1];
      p[2] = c[2];
    }
  return img;
}

namespace {

void draw_line(Image& img, double x0, double y0, double x1, double y1) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
    std::uint8_t* p = img.px(x, y);
    p[0] = p[1] = p[2] = 0;
  }
}

}  // namespace

void arrow_grid_overlay(Image& img, const Tensor& flow, int cell) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2)
    throw shape_error("arrow_grid_overlay: expected 2xHxW, got " + flow.shape().str());
  const int h = flow.shape()[1], w = flow.shape()[2];
  if (img.width != w || img.height != h)
    throw shape_error("arrow_grid_overlay: image and flow sizes differ");
  if (cell < 1) throw validation_error("arrow_grid_overlay: cell must be >= 1");
  auto v = flow.value();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double field_max = 0;
  for (std::size_t i = 0; i < plane; ++i)
    field_max = std::max(field_max, std::hypot(static_cast<double>(v[i]),
                                               static_cast<double>(v[plane + i])));
  if (field_max <= 0) return;  // nothing to draw

  for (int cy = 0; cy < h; cy += cell)
    for (int cx = 0; cx < w; cx += cell) {
      double best = 0, bu = 0, bv = 0;
      for (int y = cy; y < std::min(cy + cell, h); ++y)
        for (int x = cx; x < std::min(cx + cell, w); ++x) {
          std::size_t i = static_cast<std::size_t>(y) * w + x;
          double m = std::hypot(static_cast<double>(v[i]), static_cast<double>(v[plane + i]));
          if (m > best) {
            best = m;
            bu = v[i];
            bv = v[plane + i];
          }
        }
      if (best <= 0) continue;
      const double scale = 0.5 * std::min(cell, std::min(w, h)) / field_max;
      const double ox = cx + std::min(cell, w - cx) / 2.0;
      const double oy = cy + std::min(cell, h - cy) / 2.0;
      const double ex = ox + bu * scale, ey = oy + bv * scale;
      draw_line(img, ox, oy, ex, ey);
      // arrowhead: two barbs at +-150 degrees off the shaft
      const double ang = std::atan2(ey - oy, ex - ox);
      const double len = 0.35 * std::hypot(ex - ox, ey - oy);
      for (double da : {2.6179938779914944, -2.6179938779914944}) {
        draw_line(img, ex, ey, ex + len * std::cos(ang + da), ey + len * std::sin(ang + da));
      }
    }
}

void write_png(const Image& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 ||
      img.rgb.size() != 3u * static_cast<std::size_t>(img.width) * img.height)
    throw validation_error("write_png: malformed image");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw io_error("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(f);
    throw io_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw io_error("png write failed for '" + path + "'");
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.px(0, y)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace flowspike
