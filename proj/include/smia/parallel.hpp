#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "smia/error.hpp"

namespace smia {

struct ParallelOptions {
  std::size_t max_in_flight = 1;  // concurrent client calls
  int max_attempts = 3;           // per request, counting the first try
};

// Calls fn() until it returns or throws something other than RetryableError, at
// most `attempts` times. The final RetryableError is rethrown.
template <typename F>
auto with_retries(int attempts, F&& fn) -> decltype(fn()) {
  for (int a = 1;; ++a) {
    try {
      return fn();
    } catch (const RetryableError&) {
      if (a >= attempts) throw;
    }
  }
}

// Evaluates fn(i) for i in [0, count) with at most `max_in_flight` calls running at
// once and returns the results in index order. The exception of the lowest failing
// index is rethrown after all workers stop.
template <typename R, typename F>
std::vector<R> ordered_map(std::size_t count, std::size_t max_in_flight, F&& fn) {
  std::vector<R> out(count);
  if (count == 0) return out;
  const std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto work = [&] {
    for (std::size_t i; !stop && (i = next.fetch_add(1)) < count;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace smia
