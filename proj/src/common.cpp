#include "dycalc/common.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace dycalc {

namespace {

int env_worker_default() {
  if (const char* s = std::getenv("DYCALC_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return 1;
}

std::atomic<int> g_workers{0};  // 0 = not set, fall back to environment

constexpr std::size_t kChunkGrain = 1024;
constexpr std::size_t kMaxChunks = 64;

}  // namespace

int worker_count() {
  const int n = g_workers.load();
  return n >= 1 ? n : env_worker_default();
}

void set_worker_count(int n) { g_workers.store(n >= 1 ? n : 0); }

std::size_t chunk_count(std::size_t n) {
  if (n == 0) return 0;
  std::size_t c = (n + kChunkGrain - 1) / kChunkGrain;
  if (c > kMaxChunks) c = kMaxChunks;
  return c;
}

void run_chunks(std::size_t n,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                std::size_t* chunk_count_out) {
  const std::size_t chunks = chunk_count(n);
  if (chunk_count_out) *chunk_count_out = chunks;
  if (chunks == 0) return;
  auto bounds = [&](std::size_t c) {
    const std::size_t b = n * c / chunks;
    const std::size_t e = n * (c + 1) / chunks;
    return std::pair<std::size_t, std::size_t>(b, e);
  };
  const int workers = worker_count();
  if (workers <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [b, e] = bounds(c);
      fn(b, e, c);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      auto [b, e] = bounds(c);
      fn(b, e, c);
    }
  };
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), chunks);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

cx reduce_sum(std::size_t n, const std::function<cx(std::size_t)>& fn) {
  const std::size_t chunks = chunk_count(n);
  std::vector<cx> partial(chunks, cx{0, 0});
  run_chunks(n, [&](std::size_t b, std::size_t e, std::size_t c) {
    cx s{0, 0};
    for (std::size_t i = b; i < e; ++i) s += fn(i);
    partial[c] = s;
  });
  cx total{0, 0};
  for (const cx& s : partial) total += s;  // fixed chunk order
  return total;
}

}  // namespace dycalc
