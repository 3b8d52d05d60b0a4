#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flowspike {

// Shape/dimension contract violations (conv channel mismatch, odd pooling
// extents, indivisible spatial sizes, ...). The CLI maps these to exit 2.
class shape_error : public std::runtime_error {
 public:
  explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input that is not a shape problem (unordered event stream,
// invalid config values, empty evaluation masks). Exit 2 as well.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// File / socket format violations. Carries the byte offset where the
// problem was detected (-1 when not applicable). Exit 1.
class io_error : public std::runtime_error {
 public:
  io_error(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (at byte offset " + std::to_string(offset) + ")"
                                       : what),
        offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

// Global worker-thread count used by the parallel kernels.
// Resolution order: set_num_threads() > FLOWSPIKE_THREADS > hardware.
int num_threads();
void set_num_threads(int n);

// Deterministic RNG. std::mt19937 has a fixed algorithm, and we avoid
// std::uniform_real_distribution (implementation-defined) so that seeded
// runs are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {
    // splitmix64 warm-up so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  float uniformf() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }
  float uniformf(float lo, float hi) { return lo + (hi - lo) * uniformf(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace flowspike
