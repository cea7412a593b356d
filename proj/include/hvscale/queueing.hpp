#pragma once

#include "hvscale/perf_profile.hpp"

namespace hvscale {

// Wait of the first request of a batch for the batch to fill at arrival
// rate `lambda_rps`: 1000 * (b - 1) / lambda, in ms.
double queue_delay(int batch, double lambda_rps);

// Worst case over "waiting for the batch to fill" and "waiting for one of
// the n busy instances to free up":
//
//   max(1000 (b - 1) / lambda, l(b, c) - 1000 (n b + 1) / lambda)
//
// Only used to validate that queue_delay() is exact for provisioned plans.
double queue_delay_worst_case(const ModelProfile& profile, int batch, int cores, int instances,
                              double lambda_rps);

// Second argument of the max above; <= 0 whenever n * h(b, c) >= lambda.
double busy_instance_wait(const ModelProfile& profile, int batch, int cores, int instances,
                          double lambda_rps);

}  // namespace hvscale
