#include "picnet/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace picnet {

int worker_threads() {
  static const int n = [] {
    const char* env = std::getenv("PICNET_THREADS");
    if (env == nullptr) return 1;
    const int v = std::atoi(env);
    return v < 1 ? 1 : v;
  }();
  return n;
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const int workers = std::min<std::int64_t>(worker_threads(), n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(0, std::min<std::int64_t>(chunk, n));
  for (auto& t : pool) t.join();
}

}  // namespace picnet
