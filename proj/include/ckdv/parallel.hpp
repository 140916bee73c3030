#ifndef CKDV_PARALLEL_HPP
#define CKDV_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ckdv {

/// Worker count: `requested` if non-zero, else CKDV_THREADS, else the number
/// of hardware threads.
inline std::size_t worker_count(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CKDV_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown by any task is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
  workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ckdv

#endif  // CKDV_PARALLEL_HPP
