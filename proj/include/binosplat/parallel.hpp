// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace binosplat {

/// Worker count used by parallel loops. Overridden by set_thread_count or the
/// BINOSPLAT_THREADS environment variable; defaults to hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) on up to thread_count() workers. Iterations
/// must write disjoint state; scheduling order is unspecified.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace binosplat
