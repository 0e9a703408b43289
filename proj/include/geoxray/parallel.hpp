#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace geoxray {

/// Worker count used by the data-parallel kernels. Defaults to the
/// GEOXRAY_THREADS environment variable, else 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n) on thread_count() workers using contiguous
/// static blocks. Each index must write only to its own output slots, so the
/// result does not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise (tree) summation; the reduction order depends only on the length.
double pairwise_sum(std::span<const double> values);

}  // namespace geoxray
