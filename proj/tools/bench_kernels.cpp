// Compares the naive serial reference kernels against the OpenMP kernels at
// a few layer shapes taken from the flow network. Verifies agreement while
// timing, so a regression in either path shows up here too.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "flowspike/common.hpp"
#include "flowspike/kernels.hpp"

using namespace flowspike;

namespace {

struct Case {
  const char* name;
  kernels::ConvDims d;
};

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = num_threads();
  if (argc > 1) {
    threads = std::atoi(argv[1]);
    set_num_threads(threads);
  }

  const std::vector<Case> cases = {
      {"initial 7x7  6->32 @128^2", {6, 128, 128, 32, 7, 3}},
      {"enc1 5x5    32->64 @64^2", {32, 64, 64, 64, 5, 2}},
      {"enc2 3x3   64->128 @32^2", {64, 32, 32, 128, 3, 1}},
      {"dec  3x3   192->64 @64^2", {192, 64, 64, 64, 3, 1}},
  };

  std::printf("conv2d kernels, %d thread(s) vs serial reference\n", threads);
  std::printf("%-28s %12s %12s %9s %10s\n", "case", "reference", "parallel", "speedup",
              "max |diff|");

  Rng rng(7);
  for (const Case& c : cases) {
    const auto& d = c.d;
    std::vector<float> in(static_cast<std::size_t>(d.c_in) * d.h * d.w);
    std::vector<float> wt(static_cast<std::size_t>(d.c_out) * d.c_in * d.k * d.k);
    std::vector<float> bias(d.c_out);
    for (auto& v : in) v = rng.uniformf(-1, 1);
    for (auto& v : wt) v = rng.uniformf(-0.2f, 0.2f);
    for (auto& v : bias) v = rng.uniformf(-0.1f, 0.1f);
    std::vector<float> out_ref(static_cast<std::size_t>(d.c_out) * d.h * d.w);
    std::vector<float> out_par(out_ref.size());

    const int reps = 5;
    double ref_ms = time_ms(reps, [&] {
      kernels::reference::conv2d_forward<float>(d, in.data(), wt.data(), bias.data(),
                                                out_ref.data());
    });
    double par_ms = time_ms(reps, [&] {
      kernels::par::conv2d_forward<float>(d, in.data(), wt.data(), bias.data(), out_par.data());
    });

    double max_diff = 0;
    for (std::size_t i = 0; i < out_ref.size(); ++i)
      max_diff = std::max(max_diff, std::abs(static_cast<double>(out_ref[i]) - out_par[i]));

    std::printf("%-28s %9.2f ms %9.2f ms %8.2fx %10.2e\n", c.name, ref_ms, par_ms,
                ref_ms / par_ms, max_diff);
  }
  return 0;
}
