#include "ranklab/core/parallel.hpp"

#include <atomic>
#include <thread>

namespace ranklab {

namespace {

int hardware_default() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

std::atomic<int> g_max_threads{0};  // 0 = hardware default

}  // namespace

int max_threads() {
  int n = g_max_threads.load(std::memory_order_relaxed);
  return n > 0 ? n : hardware_default();
}

void set_max_threads(int n) {
  g_max_threads.store(n < 0 ? 0 : n, std::memory_order_relaxed);
}

}  // namespace ranklab
