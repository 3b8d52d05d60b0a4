#pragma once

// Raw convolution kernels on contiguous row-major buffers.
//
// Two implementations live side by side:
//   kernels::reference — naive loop nests, single-threaded. Kept as the
//                        correctness baseline for tests and the benchmark.
//   kernels::par       — OpenMP versions used by the tensor ops. Each output
//                        element is accumulated by exactly one thread in a
//                        fixed order, so results are bit-identical for any
//                        thread count (and identical to a 1-thread run).
//
// Layout: input C×H×W, weight O×C×K×K, bias O, output O×H×W, stride 1,
// zero padding `pad` (spatial size preserved when pad = (K-1)/2).

#include <algorithm>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowspike/common.hpp"

namespace flowspike::kernels {

struct ConvDims {
  int c_in = 0, h = 0, w = 0;  // input
  int c_out = 0, k = 0;        // filters
  int pad = 0;
};

namespace reference {

template <typename S>
void conv2d_forward(const ConvDims& d, const S* in, const S* wt, const S* bias, S* out) {
  for (int oc = 0; oc < d.c_out; ++oc)
    for (int y = 0; y < d.h; ++y)
      for (int x = 0; x < d.w; ++x) {
        S acc = bias ? bias[oc] : S(0);
        for (int ic = 0; ic < d.c_in; ++ic)
          for (int ky = 0; ky < d.k; ++ky)
            for (int kx = 0; kx < d.k; ++kx) {
              int iy = y + ky - d.pad, ix = x + kx - d.pad;
              if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
              acc += in[(static_cast<std::int64_t>(ic) * d.h + iy) * d.w + ix] *
                     wt[((static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k + ky) * d.k + kx];
            }
        out[(static_cast<std::int64_t>(oc) * d.h + y) * d.w + x] = acc;
      }
}

template <typename S>
void conv2d_backward_input(const ConvDims& d, const S* gout, const S* wt, S* gin) {
  for (int ic = 0; ic < d.c_in; ++ic)
    for (int iy = 0; iy < d.h; ++iy)
      for (int ix = 0; ix < d.w; ++ix) {
        S acc = 0;
        for (int oc = 0; oc < d.c_out; ++oc)
          for (int ky = 0; ky < d.k; ++ky)
            for (int kx = 0; kx < d.k; ++kx) {
              int oy = iy - ky + d.pad, ox = ix - kx + d.pad;
              if (oy < 0 || oy >= d.h || ox < 0 || ox >= d.w) continue;
              acc += gout[(static_cast<std::int64_t>(oc) * d.h + oy) * d.w + ox] *
                     wt[((static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k + ky) * d.k + kx];
            }
        gin[(static_cast<std::int64_t>(ic) * d.h + iy) * d.w + ix] += acc;
      }
}

template <typename S>
void conv2d_backward_weight(const ConvDims& d, const S* gout, const S* in, S* gwt, S* gbias) {
  for (int oc = 0; oc < d.c_out; ++oc) {
    for (int ic = 0; ic < d.c_in; ++ic)
      for (int ky = 0; ky < d.k; ++ky)
        for (int kx = 0; kx < d.k; ++kx) {
          S acc = 0;
          for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
              int iy = y + ky - d.pad, ix = x + kx - d.pad;
              if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
              acc += gout[(static_cast<std::int64_t>(oc) * d.h + y) * d.w + x] *
                     in[(static_cast<std::int64_t>(ic) * d.h + iy) * d.w + ix];
            }
          gwt[((static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k + ky) * d.k + kx] += acc;
        }
    if (gbias) {
      S acc = 0;
      const S* go = gout + static_cast<std::int64_t>(oc) * d.h * d.w;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.h) * d.w; ++i) acc += go[i];
      gbias[oc] += acc;
    }
  }
}

}  // namespace reference

namespace par {

// Row-accumulating forward: for each (oc, y) the kernel taps are streamed
// across the output row, which vectorizes and keeps the accumulation order
// fixed per output element.
template <typename S>
void conv2d_forward(const ConvDims& d, const S* in, const S* wt, const S* bias, S* out) {
  const int nt = num_threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(nt)
  for (int oc = 0; oc < d.c_out; ++oc)
    for (int y = 0; y < d.h; ++y) {
      S* orow = out + (static_cast<std::int64_t>(oc) * d.h + y) * d.w;
      const S b = bias ? bias[oc] : S(0);
      for (int x = 0; x < d.w; ++x) orow[x] = b;
      for (int ic = 0; ic < d.c_in; ++ic) {
        const S* iplane = in + static_cast<std::int64_t>(ic) * d.h * d.w;
        const S* wrow = wt + (static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k * d.k;
        for (int ky = 0; ky < d.k; ++ky) {
          const int iy = y + ky - d.pad;
          if (iy < 0 || iy >= d.h) continue;
          const S* irow = iplane + static_cast<std::int64_t>(iy) * d.w;
          for (int kx = 0; kx < d.k; ++kx) {
            const S wv = wrow[ky * d.k + kx];
            const int off = kx - d.pad;
            const int x0 = std::max(0, -off), x1 = std::min(d.w, d.w - off);
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x + off];
          }
        }
      }
    }
}

template <typename S>
void conv2d_backward_input(const ConvDims& d, const S* gout, const S* wt, S* gin) {
  const int nt = num_threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(nt)
  for (int ic = 0; ic < d.c_in; ++ic)
    for (int iy = 0; iy < d.h; ++iy) {
      S* grow = gin + (static_cast<std::int64_t>(ic) * d.h + iy) * d.w;
      for (int oc = 0; oc < d.c_out; ++oc) {
        const S* gplane = gout + static_cast<std::int64_t>(oc) * d.h * d.w;
        const S* wrow = wt + (static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k * d.k;
        for (int ky = 0; ky < d.k; ++ky) {
          const int oy = iy - ky + d.pad;
          if (oy < 0 || oy >= d.h) continue;
          const S* grow_out = gplane + static_cast<std::int64_t>(oy) * d.w;
          for (int kx = 0; kx < d.k; ++kx) {
            const S wv = wrow[ky * d.k + kx];
            const int off = d.pad - kx;
            const int x0 = std::max(0, -off), x1 = std::min(d.w, d.w - off);
            for (int ix = x0; ix < x1; ++ix) grow[ix] += wv * grow_out[ix + off];
          }
        }
      }
    }
}

template <typename S>
void conv2d_backward_weight(const ConvDims& d, const S* gout, const S* in, S* gwt, S* gbias) {
  const int nt = num_threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(nt)
  for (int oc = 0; oc < d.c_out; ++oc)
    for (int ic = 0; ic < d.c_in; ++ic) {
      const S* gplane = gout + static_cast<std::int64_t>(oc) * d.h * d.w;
      const S* iplane = in + static_cast<std::int64_t>(ic) * d.h * d.w;
      S* wrow = gwt + (static_cast<std::int64_t>(oc) * d.c_in + ic) * d.k * d.k;
      for (int ky = 0; ky < d.k; ++ky)
        for (int kx = 0; kx < d.k; ++kx) {
          S acc = 0;
          for (int y = 0; y < d.h; ++y) {
            const int iy = y + ky - d.pad;
            if (iy < 0 || iy >= d.h) continue;
            const S* grow = gplane + static_cast<std::int64_t>(y) * d.w;
            const S* irow = iplane + static_cast<std::int64_t>(iy) * d.w;
            const int off = kx - d.pad;
            const int x0 = std::max(0, -off), x1 = std::min(d.w, d.w - off);
            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x + off];
          }
          wrow[ky * d.k + kx] += acc;
        }
    }
  if (gbias) {
#pragma omp parallel for schedule(static) num_threads(nt)
    for (int oc = 0; oc < d.c_out; ++oc) {
      S acc = 0;
      const S* go = gout + static_cast<std::int64_t>(oc) * d.h * d.w;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.h) * d.w; ++i) acc += go[i];
      gbias[oc] += acc;
    }
  }
}

}  // namespace par

}  // namespace flowspike::kernels
