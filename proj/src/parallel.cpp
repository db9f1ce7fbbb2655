#include "aepo/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace aepo::par {

namespace {

int initial_cap() {
  if (const char* env = std::getenv("AEPO_LAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

std::atomic<int>& cap_storage() {
  static std::atomic<int> cap{initial_cap()};
  return cap;
}

}  // namespace

int thread_cap() { return cap_storage().load(); }

void set_thread_cap(int cap) { cap_storage().store(cap < 1 ? 1 : cap); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_cap()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t lo = n * t / workers;
      const std::size_t hi = n * (t + 1) / workers;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace aepo::par
