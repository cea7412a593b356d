#include "hvscale/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hvscale/error.hpp"

namespace hvscale {
namespace {

void check(int batch, double lambda_rps) {
  if (batch < 1) throw InvalidArgument("batch must be >= 1, got " + std::to_string(batch));
  if (!(lambda_rps > 0.0) || !std::isfinite(lambda_rps)) {
    throw InvalidArgument("arrival rate must be positive and finite");
  }
}

}  // namespace

double queue_delay(int batch, double lambda_rps) {
  check(batch, lambda_rps);
  return 1000.0 * (batch - 1) / lambda_rps;
}

double busy_instance_wait(const ModelProfile& profile, int batch, int cores, int instances,
                          double lambda_rps) {
  check(batch, lambda_rps);
  if (instances < 1) throw InvalidArgument("instances must be >= 1");
  return latency(profile, batch, cores) -
         1000.0 * (static_cast<double>(instances) * batch + 1.0) / lambda_rps;
}

double queue_delay_worst_case(const ModelProfile& profile, int batch, int cores, int instances,
                              double lambda_rps) {
  return std::max(queue_delay(batch, lambda_rps),
                  busy_instance_wait(profile, batch, cores, instances, lambda_rps));
}

}  // namespace hvscale
