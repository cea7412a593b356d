#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvscale/optimizer.hpp"
#include "hvscale/predictor.hpp"
#include "hvscale/transition.hpp"

namespace hvscale {

// Target requests per second, one entry per second of the experiment.
struct WorkloadTrace {
  std::vector<int> rps;

  bool operator==(const WorkloadTrace&) const = default;
};

enum class PolicyKind {
  Joint,           // transition controller: vertical bursts, horizontal steady state
  HorizontalOnly,  // solve_horizontal on the current rate every tick
  VerticalOnly,    // solve_vertical with one instance per stage
  Static,          // fixed plan, no control actions
};

enum class DropPolicy { AtSlo, At3xSlo, Never };

// Rate the baseline policies size their plans for: the joint controller's
// max(current, forecast), or the arrivals of the last control period alone.
enum class BaselineRate { Forecast, Current };

const char* to_string(PolicyKind policy);
const char* to_string(DropPolicy policy);
const char* to_string(BaselineRate rate);

struct TimingKnobs {
  std::int64_t cold_start_ms = 5500;
  std::int64_t inplace_delay_ms = 100;
  std::int64_t control_period_ms = 1000;
  // Extra wait allowed beyond q(b, lambda) before a partial batch is flushed.
  double flush_slack_ms = 0.0;
  // How long queued work may drain after the trace ends.
  std::int64_t drain_limit_ms = 60'000;

  bool operator==(const TimingKnobs&) const = default;
};

struct Scenario {
  PipelineSpec spec;
  WorkloadTrace trace;
  PolicyKind policy = PolicyKind::Joint;
  // Required for Static; for the other policies overrides the default
  // starting deployment (horizontal plan for trace[0], or the vertical plan
  // on one instance per stage for VerticalOnly).
  std::optional<PipelinePlan> initial_plan;
  DropPolicy drop_policy = DropPolicy::AtSlo;
  std::uint64_t seed = 1;
  TimingKnobs timing;
  WindowedMaxConfig predictor;
  int horizon_s = 10;
  BaselineRate baseline_rate = BaselineRate::Forecast;
  // Add the first stage backlog beyond one dispatch round, drained over one
  // control period, to the rate every policy sizes for.
  bool backlog_drain = true;

  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

struct SecondMetrics {
  long second = 0;
  // Arrivals generated in this second.
  long rps = 0;
  // Requests arriving in this second that were dropped or served late.
  long violations = 0;
  long drops = 0;
  // P99 end-to-end latency of the served requests that arrived in this
  // second; 0 when none were served.
  double p99_ms = 0.0;
  // Mean allocated cores (including booting and draining instances) over
  // the second.
  double cost_cores = 0.0;

  bool operator==(const SecondMetrics&) const = default;
};

struct ControlRecord {
  std::int64_t t_ms = 0;
  ControllerMode mode = ControllerMode::HorizontalSteady;
  double lambda_now = 0.0;
  double lambda_pred = 0.0;
  bool stable = false;
  int actions = 0;
  int allocated_cores = 0;

  bool operator==(const ControlRecord&) const = default;
};

struct SimReport {
  std::vector<SecondMetrics> seconds;
  long total_arrivals = 0;
  long served = 0;
  long dropped = 0;
  long late_served = 0;
  long in_flight_at_end = 0;
  // (late_served + dropped) / total_arrivals.
  double violation_rate = 0.0;
  // Integral of allocated cores over the trace duration, from the global
  // allocation curve and from per-instance ledgers respectively.
  double total_core_seconds = 0.0;
  double instance_core_seconds = 0.0;
  double p99_ms = 0.0;
  std::vector<ControlRecord> control;
  std::vector<ScalingAction> actions;
  // Largest number of batches any instance ran at once (must be 1) and
  // dispatches attempted on not-yet-ready instances (must be 0).
  int max_concurrent_batches = 0;
  long early_dispatches = 0;
  // Longest end-to-end latency among served requests.
  double max_served_latency_ms = 0.0;
  // Longest processing time of any single batch.
  double max_batch_latency_ms = 0.0;

  long violations() const { return late_served + dropped; }

  bool operator==(const SimReport&) const = default;
};

// AtSlo drops once a request is slo_ms old, At3xSlo at 3 * slo_ms, Never never.
bool should_drop(double arrival_ms, double now_ms, DropPolicy policy, int slo_ms);

// Batching rule of a stage queue, given the enqueue times of the queued
// requests in FIFO order. Dispatches b requests once b are queued; flushes
// a partial batch once the head has waited longer than `flush_after_ms`.
// Returns the number of requests to dispatch, or nullopt to keep waiting.
std::optional<std::size_t> batch_dispatch_rule(std::span<const double> enqueue_ms, int batch,
                                               double now_ms, double flush_after_ms);

// Replays the scenario's trace with Poisson arrivals. Deterministic in the
// scenario (including its seed).
SimReport run(const Scenario& scenario);

}  // namespace hvscale
