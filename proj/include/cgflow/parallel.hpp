#pragma once

#include <functional>
#include <vector>

namespace cgflow {

// Intra-step parallelism cap: CGFLOW_THREADS if set (>=1), else all cores.
int max_parallel_tasks();

// Runs the tasks, at most max_parallel_tasks() at a time.  Rethrows the first
// exception after all workers have joined.
void parallel_invoke(std::vector<std::function<void()>> tasks);

}  // namespace cgflow
