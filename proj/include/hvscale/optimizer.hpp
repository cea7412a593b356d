#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvscale/perf_profile.hpp"

namespace hvscale {

// A linear chain of DL models sharing one end-to-end latency SLO.
struct PipelineSpec {
  std::string name;
  std::vector<ModelProfile> stages;
  int slo_ms = 0;

  // Nonempty, positive SLO, every stage profile valid.
  void validate() const;

  // Sum over stages of l(1, c_max): the fastest any request can traverse the
  // pipeline. Specs loaded from disk must have slo_ms at least this large.
  double min_unloaded_latency_ms() const;

  bool operator==(const PipelineSpec&) const = default;
};

enum class PlanKind { Vertical, Horizontal, Hybrid };

const char* to_string(PlanKind kind);

struct StagePlan {
  int batch = 1;
  int cores = 1;
  int instances = 1;

  bool operator==(const StagePlan&) const = default;
};

struct PipelinePlan {
  PlanKind kind = PlanKind::Vertical;
  std::vector<StagePlan> stages;
  // Rate the plan must serve.
  double lambda_rps = 0.0;
  // Hybrid: rate the vertically scaled tier was solved for. Equals
  // lambda_rps for the other kinds.
  double lambda_vertical_rps = 0.0;
  // Hybrid: additional instances per stage, same batch and cores as the
  // vertical tier. Zero-filled for the other kinds.
  std::vector<int> extra_instances;
  // Sum over stages of (instances + extra) * cores.
  int total_cores = 0;
  // Sum over stages of l(b, c) + q(b) at the solved rate.
  double predicted_e2e_ms = 0.0;
  // Same sum in the solver's whole-millisecond units; never above the SLO.
  int budget_ms = 0;

  int total_instances(std::size_t stage) const;

  bool operator==(const PipelinePlan&) const = default;
};

// Per-stage latency charge used by every solver: l(b, c) + q(b) rounded up
// to whole milliseconds.
int stage_budget_ms(const ModelProfile& profile, int batch, int cores, double lambda_rps);

// n * h(b, c) >= lambda.
bool serves(const ModelProfile& profile, int batch, int cores, int instances, double lambda_rps);

// Smallest n >= 1 with n * throughput >= lambda.
int required_instances(double throughput_rps, double lambda_rps);

// Minimum-core (b, c) per stage with the instance count of each stage fixed
// (`instances` empty means one instance per stage). nullopt when no
// assignment meets both the SLO and the throughput constraint.
std::optional<PipelinePlan> solve_vertical(const PipelineSpec& spec, double lambda_rps,
                                           std::span<const int> instances = {});

// Fallback when solve_vertical fails at lambda: bisects the largest integer
// rate below lambda the vertical solver can serve, keeps that plan and adds
// instances with the same (b, c) for the residual load. nullopt when no
// positive rate is vertically servable. Throws InvalidArgument if the
// vertical solver already succeeds at lambda.
std::optional<PipelinePlan> solve_hybrid(const PipelineSpec& spec, double lambda_rps,
                                         std::span<const int> instances = {});

// solve_vertical, falling back to solve_hybrid.
std::optional<PipelinePlan> solve_vertical_or_hybrid(const PipelineSpec& spec, double lambda_rps,
                                                     std::span<const int> instances = {});

// All stages on 1-core instances; picks batch sizes minimizing the total
// instance count under the SLO.
std::optional<PipelinePlan> solve_horizontal(const PipelineSpec& spec, double lambda_rps);

enum class SearchMode { Vertical, Horizontal };

inline constexpr std::int64_t kBruteForceGridLimit = 10'000'000;

// Exhaustive-search reference for solve_vertical / solve_horizontal. Throws
// GridTooLarge when the search space exceeds `grid_limit` points.
std::optional<PipelinePlan> brute_force_optimize(const PipelineSpec& spec, double lambda_rps,
                                                 SearchMode mode,
                                                 std::span<const int> instances = {},
                                                 std::int64_t grid_limit = kBruteForceGridLimit);

// Throughput of all instances of `stage` in `plan`, including hybrid extras.
double stage_capacity(const PipelineSpec& spec, const PipelinePlan& plan, std::size_t stage);

}  // namespace hvscale
