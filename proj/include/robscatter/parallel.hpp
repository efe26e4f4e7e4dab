#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace robscatter {

/// Worker count for `requested`; 0 means one per hardware thread.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls f(k) for every k in [0, count) on up to `threads` workers. Tasks must
/// write to disjoint outputs. The exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& f) {
  threads = std::min(resolve_threads(threads), count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) f(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::size_t error_index = count;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      try {
        f(k);
      } catch (...) {
        std::lock_guard lock(mu);
        if (k < error_index) {
          error_index = k;
          error = std::current_exception();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

/// Fixed binary-tree reduction in index order; the result does not depend on
/// how the parts were computed.
template <class T, class Combine>
T tree_reduce(std::vector<T> parts, Combine&& combine) {
  if (parts.empty()) return T{};
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) combine(parts[i], parts[i + stride]);
  return std::move(parts.front());
}

}  // namespace robscatter
