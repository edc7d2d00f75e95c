// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace distillab {

/// Worker threads used by parallel_for on the calling thread. Defaults to the
/// DISTILLAB_THREADS environment variable, else 1.
int thread_count();
void set_thread_count(int threads);

/// RAII override of thread_count() for the current thread.
class ThreadScope {
 public:
  explicit ThreadScope(int threads);
  ~ThreadScope();
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
};

/// Runs task(i) for i in [0, n). Tasks are claimed dynamically, so results
/// must not depend on which thread runs which task.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace distillab
