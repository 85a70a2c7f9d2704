// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

namespace rerender {

// Number of worker threads used by heavy ops. Defaults to hardware
// concurrency (capped at 16), overridable with env RERENDER_PI_THREADS.
int thread_count();

// Force the thread count (used by the benchmark to pin single-threaded runs).
// count <= 0 restores the default.
void set_thread_count(int count);

// Runs fn(begin, end) over a partition of [0, n). Each index is processed by
// exactly one worker and the per-index work never depends on the partition,
// so results are deterministic. Falls back to inline execution when n < grain
// or only one thread is available. Pass a small grain for coarse work items
// (e.g. GEMM rows).
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn,
                  int64_t grain = 4096);

}  // namespace rerender
