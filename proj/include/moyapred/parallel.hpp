#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace moyapred {

// Worker cap from MOYAPRED_WORKERS; unset or invalid means 1 (sequential).
std::size_t workers_from_environment();

// out[i] = fn(i) for i in [0, n), evaluated on up to `workers` threads. The
// output order is fixed, so results never depend on scheduling. The first
// exception (lowest index) is rethrown after all workers finish.
template <typename R, typename Fn>
std::vector<R> parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  const auto run = [&](std::size_t i) {
    try {
      slots[i].emplace(fn(i));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::function<void()> drain = [&] {
      for (std::size_t i = next++; i < n; i = next++) run(i);
    };
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace moyapred
