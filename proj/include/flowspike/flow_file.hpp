#pragma once

// Middlebury-style .flo container: float32 magic 202021.25, i32 width,
// i32 height, then row-major interleaved (u, v) float32 pairs. Little-endian,
// finite values only.

#include <iosfwd>
#include <string>

#include "flowspike/tensor.hpp"

namespace flowspike {

Tensor read_flow(std::istream& is);          // returns 2xHxW
Tensor read_flow(const std::string& path);

void write_flow(std::ostream& os, const Tensor& flow);
void write_flow(const std::string& path, const Tensor& flow);

}  // namespace flowspike
