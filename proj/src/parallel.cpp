// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace distillab {
namespace {

int default_threads() {
  if (const char* env = std::getenv("DISTILLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

thread_local int tls_threads = 0;

}  // namespace

int thread_count() {
  if (tls_threads <= 0) tls_threads = default_threads();
  return tls_threads;
}

void set_thread_count(int threads) { tls_threads = std::max(1, threads); }

ThreadScope::ThreadScope(int threads) : previous_(thread_count()) { set_thread_count(threads); }

ThreadScope::~ThreadScope() { set_thread_count(previous_); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    // Nested parallel_for calls run serially inside a worker.
    ThreadScope serial(1);
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace distillab
