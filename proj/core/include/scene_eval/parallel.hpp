#pragma once

#include <cstddef>
#include <functional>

namespace scene_eval {

/// Worker count: the value from set_thread_count() if non-zero, otherwise
/// SCENE_EVAL_THREADS, otherwise hardware concurrency.
std::size_t thread_count();

/// 0 restores the environment/hardware default.
void set_thread_count(std::size_t n);

/// Splits [0, n) into contiguous chunks and calls fn(begin, end) for each,
/// one chunk per worker. Callers must not accumulate across chunks; every
/// output slot is owned by exactly one index. If any chunk throws, the
/// exception from the lowest chunk is rethrown after all workers join.
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn);

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace scene_eval
