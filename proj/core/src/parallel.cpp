#include "tsinception/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "tsinception/error.hpp"

namespace tsinception {

namespace {

int default_workers() {
  if (const char* env = std::getenv("TSINCEPTION_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int> g_workers{0};  // 0 = not yet resolved

}  // namespace

int worker_count() {
  int n = g_workers.load(std::memory_order_relaxed);
  if (n == 0) {
    n = default_workers();
    g_workers.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_worker_count(int n) {
  check(n >= 1, "worker pool width must be >= 1, got ", n);
  g_workers.store(n, std::memory_order_relaxed);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int width = std::min(worker_count(), n);
  if (width == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  // contiguous static partition: worker w owns [w*n/width, (w+1)*n/width)
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(width) - 1);
  auto run = [&](int w) {
    const int lo = static_cast<int>(static_cast<long long>(n) * w / width);
    const int hi = static_cast<int>(static_cast<long long>(n) * (w + 1) / width);
    for (int i = lo; i < hi; ++i) fn(i);
  };
  for (int w = 1; w < width; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
}

}  // namespace tsinception
