#include "flowspike/flow_file.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace flowspike {

namespace {

constexpr float kFlowMagic = 202021.25f;
constexpr std::int64_t kMaxPixels = 100'000'000;

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float rd_f32(const unsigned char* p) {
  std::uint32_t u = rd_u32(p);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

void wr_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

void wr_f32(unsigned char* p, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  wr_u32(p, u);
}

}  // namespace

Tensor read_flow(std::istream& is) {
  unsigned char hdr[12];
  is.read(reinterpret_cast<char*>(hdr), 12);
  if (is.gcount() != 12) throw io_error("truncated flow file header", is.gcount());
  if (rd_f32(hdr) != kFlowMagic) throw io_error("bad flow file magic", 0);
  std::int32_t w = static_cast<std::int32_t>(rd_u32(hdr + 4));
  std::int32_t h = static_cast<std::int32_t>(rd_u32(hdr + 8));
  if (w <= 0 || h <= 0) throw io_error("non-positive flow dimensions", 4);
  if (static_cast<std::int64_t>(w) * h > kMaxPixels)
    throw io_error("implausible flow dimensions " + std::to_string(w) + "x" + std::to_string(h), 4);

  Tensor t = Tensor::zeros(Shape{2, h, w});
  auto v = t.value_mut();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 8);
  std::int64_t off = 12;
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (static_cast<std::size_t>(is.gcount()) != row.size())
      throw io_error("truncated flow file payload at row " + std::to_string(y),
                     off + is.gcount());
    for (int x = 0; x < w; ++x) {
      float u = rd_f32(row.data() + 8 * x);
      float vv = rd_f32(row.data() + 8 * x + 4);
      if (!std::isfinite(u) || !std::isfinite(vv))
        throw io_error("non-finite flow value at (" + std::to_string(x) + "," + std::to_string(y) +
                           ")",
                       off + 8 * x);
      v[static_cast<std::size_t>(y) * w + x] = u;
      v[plane + static_cast<std::size_t>(y) * w + x] = vv;
    }
    off += static_cast<std::int64_t>(row.size());
  }
  return t;
}

Tensor read_flow(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  return read_flow(f);
}

void write_flow(std::ostream& os, const Tensor& flow) {
  if (flow.shape().rank() != 3 || flow.shape()[0] != 2)
    throw shape_error("write_flow: expected 2xHxW, got " + flow.shape().str());
  const int h = flow.shape()[1], w = flow.shape()[2];
  auto v = flow.value();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < 2 * plane; ++i)
    if (!std::isfinite(v[i])) throw validation_error("write_flow: non-finite flow value");

  unsigned char hdr[12];
  wr_f32(hdr, kFlowMagic);
  wr_u32(hdr + 4, static_cast<std::uint32_t>(w));
  wr_u32(hdr + 8, static_cast<std::uint32_t>(h));
  os.write(reinterpret_cast<const char*>(hdr), 12);

  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 8);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      wr_f32(row.data() + 8 * x, v[static_cast<std::size_t>(y) * w + x]);
      wr_f32(row.data() + 8 * x + 4, v[plane + static_cast<std::size_t>(y) * w + x]);
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw io_error("flow file write failed");
}

void write_flow(const std::string& path, const Tensor& flow) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  write_flow(f, flow);
  f.flush();
  if (!f) throw io_error("flow file write failed for '" + path + "'");
}

}  // namespace flowspike
