#pragma once

#include <vector>

// Amdahl's-law arguments behind the scaling policy: for a fixed core budget,
// many 1-core instances out-serve fewer multi-core ones, and when instances
// must grow, an even split of cores beats an uneven one.
namespace hvscale::amdahl {

// L(r) = 1 / ((1 - p) + p / r), p the parallelizable fraction in [0, 1].
double speedup(double cores, double parallel_fraction);

// r * L(1) >= k * L(r / k) for every divisor k of r.
bool one_core_dominates(int total_cores, double parallel_fraction, double tolerance = 1e-12);

// 2 * L(n) >= L(2n - 1) + L(1).
bool even_pair_dominates(int cores_per_instance, double parallel_fraction,
                         double tolerance = 1e-12);

// Summed speedup of instances with the given core counts.
double total_speedup(const std::vector<int>& split, double parallel_fraction);

// Split of `total` cores over `instances` instances whose sizes differ by at
// most one.
std::vector<int> even_split(int total, int instances);

// Best summed speedup over every split of `total` into `instances` positive
// parts, by exhaustive enumeration.
double best_split_speedup(int total, int instances, double parallel_fraction);

}  // namespace hvscale::amdahl
