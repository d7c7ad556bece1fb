#pragma once

// Block-parallel loops with a fixed decomposition. Work is cut into blocks
// whose boundaries depend only on the problem size, never on the worker
// count, so per-block partial results can be reduced in block order and the
// output is bitwise identical for any number of threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace arfuse::parallel {

inline constexpr std::size_t kDefaultBlock = 256;

/// Worker count from AR_FUSE_THREADS, or 1 when unset or malformed.
inline std::size_t env_threads() {
  if (const char* env = std::getenv("AR_FUSE_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

namespace detail {
inline std::size_t& thread_setting() {
  static std::size_t threads = env_threads();
  return threads;
}
}  // namespace detail

inline std::size_t threads() { return detail::thread_setting(); }

inline void set_threads(std::size_t n) { detail::thread_setting() = std::max<std::size_t>(n, 1); }

inline std::size_t block_count(std::size_t n, std::size_t block = kDefaultBlock) {
  return block == 0 ? 0 : (n + block - 1) / block;
}

/// Calls fn(block_index, begin, end) for each block of [0, n). Blocks are
/// claimed dynamically; an exception from the lowest-numbered failing block
/// is rethrown after all workers finish.
template <class Fn>
void for_blocks(std::size_t n, std::size_t block, Fn&& fn) {
  const std::size_t nblocks = block_count(n, block);
  if (nblocks == 0) return;
  const std::size_t workers = std::min(threads(), nblocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) fn(b, b * block, std::min(n, (b + 1) * block));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(nblocks);
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= nblocks) return;
      try {
        fn(b, b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Calls fn(i) for every i in [0, n).
template <class Fn>
void for_each_index(std::size_t n, Fn&& fn, std::size_t block = kDefaultBlock) {
  for_blocks(n, block, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

/// Sums term(i) over [0, n): per-block partial sums, then a serial sum in
/// block order.
template <class T, class Fn>
T reduce_sum(std::size_t n, Fn&& term, std::size_t block = kDefaultBlock) {
  std::vector<T> partial(block_count(n, block), T{});
  for_blocks(n, block, [&](std::size_t b, std::size_t begin, std::size_t end) {
    T acc{};
    for (std::size_t i = begin; i < end; ++i) acc += term(i);
    partial[b] = acc;
  });
  T total{};
  for (const T& p : partial) total += p;
  return total;
}

}  // namespace arfuse::parallel
