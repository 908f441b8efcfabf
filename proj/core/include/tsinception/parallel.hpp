#pragma once

#include <functional>

namespace tsinception {

// width of the worker pool. defaults to the TSINCEPTION_WORKERS environment
// variable if set, else the hardware thread count.
int worker_count();
void set_worker_count(int n);

// run fn(0), ..., fn(n-1) across the worker pool. each index is executed by
// exactly one worker and must write only its own outputs, so results are
// identical for every pool width; width 1 runs inline.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace tsinception
