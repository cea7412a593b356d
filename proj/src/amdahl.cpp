#include "hvscale/amdahl.hpp"

#include <algorithm>
#include <functional>

#include "hvscale/error.hpp"

namespace hvscale::amdahl {

double speedup(double cores, double parallel_fraction) {
  if (!(cores > 0.0)) throw InvalidArgument("cores must be positive");
  if (parallel_fraction < 0.0 || parallel_fraction > 1.0) {
    throw InvalidArgument("parallel fraction must lie in [0, 1]");
  }
  return 1.0 / ((1.0 - parallel_fraction) + parallel_fraction / cores);
}

bool one_core_dominates(int total_cores, double parallel_fraction, double tolerance) {
  if (total_cores < 1) throw InvalidArgument("total cores must be >= 1");
  const double singles = total_cores * speedup(1.0, parallel_fraction);
  for (int k = 1; k <= total_cores; ++k) {
    if (total_cores % k != 0) continue;
    if (singles + tolerance < k * speedup(total_cores / k, parallel_fraction)) return false;
  }
  return true;
}

bool even_pair_dominates(int cores_per_instance, double parallel_fraction, double tolerance) {
  if (cores_per_instance < 1) throw InvalidArgument("cores per instance must be >= 1");
  const double even = 2.0 * speedup(cores_per_instance, parallel_fraction);
  const double skewed =
      speedup(2 * cores_per_instance - 1, parallel_fraction) + speedup(1.0, parallel_fraction);
  return even + tolerance >= skewed;
}

double total_speedup(const std::vector<int>& split, double parallel_fraction) {
  double sum = 0.0;
  for (int c : split) sum += speedup(c, parallel_fraction);
  return sum;
}

std::vector<int> even_split(int total, int instances) {
  if (instances < 1 || total < instances) throw InvalidArgument("need total >= instances >= 1");
  std::vector<int> split(static_cast<std::size_t>(instances), total / instances);
  for (int i = 0; i < total % instances; ++i) ++split[static_cast<std::size_t>(i)];
  return split;
}

double best_split_speedup(int total, int instances, double parallel_fraction) {
  if (instances < 1 || total < instances) throw InvalidArgument("need total >= instances >= 1");
  std::vector<int> parts;
  double best = 0.0;
  // Nonincreasing parts enumerate each multiset once.
  std::function<void(int, int)> extend = [&](int remaining, int cap) {
    if (static_cast<int>(parts.size()) == instances) {
      if (remaining == 0) best = std::max(best, total_speedup(parts, parallel_fraction));
      return;
    }
    const int slots = instances - static_cast<int>(parts.size());
    for (int c = std::min(cap, remaining - (slots - 1)); c >= 1; --c) {
      parts.push_back(c);
      extend(remaining - c, c);
      parts.pop_back();
    }
  };
  extend(total, total);
  return best;
}

}  // namespace hvscale::amdahl
