#include "flowspike/common.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace flowspike {

namespace {

int default_threads() {
  if (const char* env = std::getenv("FLOWSPIKE_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};  // 0 == not set explicitly
  return n;
}

}  // namespace

int num_threads() {
  int n = thread_setting().load(std::memory_order_relaxed);
  return n >= 1 ? n : default_threads();
}

void set_num_threads(int n) { thread_setting().store(n >= 1 ? n : 0, std::memory_order_relaxed); }

}  // namespace flowspike
