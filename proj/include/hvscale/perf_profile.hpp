#pragma once

#include <span>
#include <string>
#include <vector>

namespace hvscale {

// One profiling measurement: mean processing latency of a batch of `batch`
// requests on an instance with `cores` CPU cores.
struct ProfileSample {
  int batch = 1;
  int cores = 1;
  double latency_ms = 0.0;
};

// Processing-latency model of one DL model:
//
//   l(b, c) = gamma * b / c + epsilon / c + delta * b + eta      [ms]
//
// gamma/epsilon are the parallelizable per-request/per-batch costs,
// delta/eta the serial ones. Throughput is the rate at which one instance
// drains back-to-back batches of size b.
struct ModelProfile {
  std::string name;
  double gamma = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  int b_max = 16;
  int c_max = 16;

  // Throws InvalidArgument unless coefficients are finite and >= 0, limits
  // are positive and the fastest configuration has positive latency.
  void validate() const;

  bool operator==(const ModelProfile&) const = default;
};

inline constexpr int kMaxProfileLimit = 1024;

// Latency in milliseconds. Throws OutOfRange outside [1, b_max] x [1, c_max].
double latency(const ModelProfile& profile, int batch, int cores);

// Requests per second one instance sustains: 1000 * b / l(b, c).
double throughput(const ModelProfile& profile, int batch, int cores);

// Nonnegative least-squares fit of the latency model. The returned profile
// carries the given limits and name.
ModelProfile fit_profile(std::span<const ProfileSample> samples, int b_max = 16, int c_max = 16,
                         std::string name = "model");

// Sum of squared residuals of `profile` over `samples` (no range checks).
double residual_sum_of_squares(const ModelProfile& profile,
                               std::span<const ProfileSample> samples);

}  // namespace hvscale
