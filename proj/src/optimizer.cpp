#include "hvscale/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hvscale/error.hpp"
#include "hvscale/queueing.hpp"

namespace hvscale {
namespace {

// Slack for floating-point noise when rounding latencies up to whole ms, so
// that e.g. 57.000000000001 charges 57.
constexpr double kRoundingSlackMs = 1e-9;

struct StageOption {
  int budget_ms;
  std::int64_t cost;
  StagePlan config;
};

std::vector<int> resolve_instances(const PipelineSpec& spec, std::span<const int> instances) {
  if (instances.empty()) return std::vector<int>(spec.stages.size(), 1);
  if (instances.size() != spec.stages.size()) {
    throw InvalidArgument("instance counts must have one entry per stage");
  }
  for (int n : instances) {
    if (n < 1) throw InvalidArgument("instance counts must be >= 1");
  }
  return {instances.begin(), instances.end()};
}

void check_rate(double lambda_rps) {
  if (!(lambda_rps > 0.0) || !std::isfinite(lambda_rps)) {
    throw InvalidArgument("arrival rate must be positive and finite");
  }
}

// Options for one stage, in tie-break order: smaller batch first, then fewer
// cores. Within a latency charge only the first cheapest option survives.
std::vector<StageOption> vertical_options(const ModelProfile& p, int instances, double lambda,
                                          int slo_ms) {
  std::vector<StageOption> raw;
  for (int b = 1; b <= p.b_max; ++b) {
    for (int c = 1; c <= p.c_max; ++c) {
      if (!serves(p, b, c, instances, lambda)) continue;
      const int budget = stage_budget_ms(p, b, c, lambda);
      if (budget > slo_ms) continue;
      raw.push_back({budget, static_cast<std::int64_t>(instances) * c, {b, c, instances}});
    }
  }
  return raw;
}

std::vector<StageOption> horizontal_options(const ModelProfile& p, double lambda, int slo_ms) {
  std::vector<StageOption> raw;
  for (int b = 1; b <= p.b_max; ++b) {
    const int budget = stage_budget_ms(p, b, 1, lambda);
    if (budget > slo_ms) continue;
    const int n = required_instances(throughput(p, b, 1), lambda);
    raw.push_back({budget, n, {b, 1, n}});
  }
  return raw;
}

std::vector<StageOption> prune(std::vector<StageOption> raw) {
  std::vector<StageOption> kept;
  for (const auto& o : raw) {
    auto same = std::find_if(kept.begin(), kept.end(),
                             [&](const StageOption& k) { return k.budget_ms == o.budget_ms; });
    if (same == kept.end()) {
      kept.push_back(o);
    } else if (o.cost < same->cost) {
      *same = o;
    }
  }
  return kept;
}

// dp[s][t]: cheapest assignment of stages 0..s whose latency charges sum to
// exactly t ms. Ties keep the first candidate found (smaller predecessor
// budget, then option order), so the result is deterministic.
std::optional<std::vector<StagePlan>> solve_chain(const std::vector<std::vector<StageOption>>& options,
                                                  int slo_ms) {
  constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max();
  const std::size_t stages = options.size();
  const auto width = static_cast<std::size_t>(slo_ms) + 1;

  std::vector<std::vector<std::int64_t>> dp(stages, std::vector<std::int64_t>(width, kUnreachable));
  std::vector<std::vector<int>> choice(stages, std::vector<int>(width, -1));

  for (std::size_t s = 0; s < stages; ++s) {
    const auto& opts = options[s];
    for (std::size_t t_prev = 0; t_prev < width; ++t_prev) {
      std::int64_t base = 0;
      if (s == 0) {
        if (t_prev != 0) break;
      } else {
        base = dp[s - 1][t_prev];
        if (base == kUnreachable) continue;
      }
      for (std::size_t k = 0; k < opts.size(); ++k) {
        const std::size_t t = t_prev + static_cast<std::size_t>(opts[k].budget_ms);
        if (t >= width) continue;
        const std::int64_t cost = base + opts[k].cost;
        if (cost < dp[s][t]) {
          dp[s][t] = cost;
          choice[s][t] = static_cast<int>(k);
        }
      }
    }
  }

  std::size_t end = width;
  for (std::size_t t = 0; t < width; ++t) {
    if (dp[stages - 1][t] == kUnreachable) continue;
    if (end == width || dp[stages - 1][t] < dp[stages - 1][end]) end = t;
  }
  if (end == width) return std::nullopt;

  std::vector<StagePlan> plan(stages);
  std::size_t t = end;
  for (std::size_t s = stages; s-- > 0;) {
    const auto& o = options[s][static_cast<std::size_t>(choice[s][t])];
    plan[s] = o.config;
    t -= static_cast<std::size_t>(o.budget_ms);
  }
  return plan;
}

PipelinePlan assemble(const PipelineSpec& spec, PlanKind kind, std::vector<StagePlan> stages,
                      double lambda, double lambda_vertical, std::vector<int> extra) {
  PipelinePlan plan;
  plan.kind = kind;
  plan.lambda_rps = lambda;
  plan.lambda_vertical_rps = lambda_vertical;
  plan.extra_instances = extra.empty() ? std::vector<int>(stages.size(), 0) : std::move(extra);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& p = spec.stages[s];
    const auto& cfg = stages[s];
    plan.total_cores += (cfg.instances + plan.extra_instances[s]) * cfg.cores;
    plan.predicted_e2e_ms += latency(p, cfg.batch, cfg.cores) + queue_delay(cfg.batch, lambda_vertical);
    plan.budget_ms += stage_budget_ms(p, cfg.batch, cfg.cores, lambda_vertical);
  }
  plan.stages = std::move(stages);
  return plan;
}

}  // namespace

void PipelineSpec::validate() const {
  if (stages.empty()) throw InvalidArgument("pipeline '" + name + "' has no stages");
  if (slo_ms <= 0) throw InvalidArgument("pipeline '" + name + "' needs slo_ms > 0");
  for (const auto& s : stages) s.validate();
}

double PipelineSpec::min_unloaded_latency_ms() const {
  double total = 0.0;
  for (const auto& s : stages) total += latency(s, 1, s.c_max);
  return total;
}

const char* to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::Vertical:
      return "vertical";
    case PlanKind::Horizontal:
      return "horizontal";
    case PlanKind::Hybrid:
      return "hybrid";
  }
  return "unknown";
}

int PipelinePlan::total_instances(std::size_t stage) const {
  return stages.at(stage).instances + (stage < extra_instances.size() ? extra_instances[stage] : 0);
}

int stage_budget_ms(const ModelProfile& profile, int batch, int cores, double lambda_rps) {
  const double ms = latency(profile, batch, cores) + queue_delay(batch, lambda_rps);
  return static_cast<int>(std::ceil(ms - kRoundingSlackMs));
}

bool serves(const ModelProfile& profile, int batch, int cores, int instances, double lambda_rps) {
  return throughput(profile, batch, cores) * instances >= lambda_rps;
}

int required_instances(double throughput_rps, double lambda_rps) {
  if (!(throughput_rps > 0.0)) throw InvalidArgument("throughput must be positive");
  if (!(lambda_rps > 0.0)) return 1;
  const double estimate = std::ceil(lambda_rps / throughput_rps);
  if (estimate > static_cast<double>(std::numeric_limits<int>::max() / 2)) {
    throw InvalidArgument("required instance count overflows");
  }
  int n = std::max(1, static_cast<int>(estimate));
  while (throughput_rps * n < lambda_rps) ++n;
  while (n > 1 && throughput_rps * (n - 1) >= lambda_rps) --n;
  return n;
}

std::optional<PipelinePlan> solve_vertical(const PipelineSpec& spec, double lambda_rps,
                                           std::span<const int> instances) {
  spec.validate();
  check_rate(lambda_rps);
  const auto counts = resolve_instances(spec, instances);
  std::vector<std::vector<StageOption>> options;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    options.push_back(prune(vertical_options(spec.stages[s], counts[s], lambda_rps, spec.slo_ms)));
    if (options.back().empty()) return std::nullopt;
  }
  auto chosen = solve_chain(options, spec.slo_ms);
  if (!chosen) return std::nullopt;
  return assemble(spec, PlanKind::Vertical, std::move(*chosen), lambda_rps, lambda_rps, {});
}

std::optional<PipelinePlan> solve_hybrid(const PipelineSpec& spec, double lambda_rps,
                                         std::span<const int> instances) {
  spec.validate();
  check_rate(lambda_rps);
  if (solve_vertical(spec, lambda_rps, instances)) {
    throw InvalidArgument("solve_hybrid called for a rate the vertical solver can serve");
  }

  // Invariant: `low` is vertically servable, `high` is not (or is >= lambda).
  const double ceiling = std::ceil(lambda_rps);
  if (ceiling <= 1.0) return std::nullopt;
  auto low_plan = solve_vertical(spec, 1.0, instances);
  if (!low_plan) return std::nullopt;
  long low = 1;
  long high = static_cast<long>(ceiling);
  while (high - low > 1) {
    const long mid = low + (high - low) / 2;
    if (auto plan = solve_vertical(spec, static_cast<double>(mid), instances)) {
      low = mid;
      low_plan = std::move(plan);
    } else {
      high = mid;
    }
  }

  std::vector<int> extra(spec.stages.size(), 0);
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& cfg = low_plan->stages[s];
    const double h = throughput(spec.stages[s], cfg.batch, cfg.cores);
    const double residual = lambda_rps - h * cfg.instances;
    if (residual > 0.0) extra[s] = required_instances(h, residual);
  }
  return assemble(spec, PlanKind::Hybrid, std::move(low_plan->stages), lambda_rps,
                  static_cast<double>(low), std::move(extra));
}

std::optional<PipelinePlan> solve_vertical_or_hybrid(const PipelineSpec& spec, double lambda_rps,
                                                     std::span<const int> instances) {
  if (auto plan = solve_vertical(spec, lambda_rps, instances)) return plan;
  return solve_hybrid(spec, lambda_rps, instances);
}

std::optional<PipelinePlan> solve_horizontal(const PipelineSpec& spec, double lambda_rps) {
  spec.validate();
  check_rate(lambda_rps);
  std::vector<std::vector<StageOption>> options;
  for (const auto& profile : spec.stages) {
    options.push_back(prune(horizontal_options(profile, lambda_rps, spec.slo_ms)));
    if (options.back().empty()) return std::nullopt;
  }
  auto chosen = solve_chain(options, spec.slo_ms);
  if (!chosen) return std::nullopt;
  return assemble(spec, PlanKind::Horizontal, std::move(*chosen), lambda_rps, lambda_rps, {});
}

std::optional<PipelinePlan> brute_force_optimize(const PipelineSpec& spec, double lambda_rps,
                                                 SearchMode mode, std::span<const int> instances,
                                                 std::int64_t grid_limit) {
  spec.validate();
  check_rate(lambda_rps);
  const auto counts = resolve_instances(spec, instances);
  const std::size_t stages = spec.stages.size();

  // Per-stage axis sizes of the mixed-radix search space.
  std::vector<int> n_cap(stages, 1);
  std::vector<std::int64_t> radix(stages);
  double grid = 1.0;
  for (std::size_t s = 0; s < stages; ++s) {
    const auto& p = spec.stages[s];
    if (mode == SearchMode::Vertical) {
      radix[s] = static_cast<std::int64_t>(p.b_max) * p.c_max;
    } else {
      // Any stage needs at most as many 1-core instances as the slowest
      // batch size would; one more is searched to show it never helps.
      double slowest = std::numeric_limits<double>::infinity();
      for (int b = 1; b <= p.b_max; ++b) slowest = std::min(slowest, throughput(p, b, 1));
      const double cap = std::ceil(lambda_rps / slowest) + 1.0;
      if (cap > static_cast<double>(grid_limit)) throw GridTooLarge("instance axis too large");
      n_cap[s] = static_cast<int>(cap);
      radix[s] = static_cast<std::int64_t>(p.b_max) * n_cap[s];
    }
    grid *= static_cast<double>(radix[s]);
  }
  if (grid > static_cast<double>(grid_limit)) {
    throw GridTooLarge("brute-force grid of " + std::to_string(grid) + " points exceeds limit");
  }

  std::optional<std::vector<StagePlan>> best;
  std::int64_t best_cost = 0;
  long best_budget = 0;
  std::vector<std::int64_t> digit(stages, 0);
  std::vector<StagePlan> candidate(stages);
  const auto total = static_cast<std::int64_t>(grid);
  for (std::int64_t point = 0; point < total; ++point) {
    bool feasible = true;
    std::int64_t cost = 0;
    long budget = 0;
    for (std::size_t s = 0; s < stages && feasible; ++s) {
      const auto& p = spec.stages[s];
      StagePlan cfg;
      if (mode == SearchMode::Vertical) {
        cfg = {static_cast<int>(digit[s] / p.c_max) + 1, static_cast<int>(digit[s] % p.c_max) + 1,
               counts[s]};
      } else {
        cfg = {static_cast<int>(digit[s] / n_cap[s]) + 1, 1, static_cast<int>(digit[s] % n_cap[s]) + 1};
      }
      if (!serves(p, cfg.batch, cfg.cores, cfg.instances, lambda_rps)) {
        feasible = false;
        break;
      }
      budget += stage_budget_ms(p, cfg.batch, cfg.cores, lambda_rps);
      cost += static_cast<std::int64_t>(cfg.instances) * cfg.cores;
      candidate[s] = cfg;
    }
    if (feasible && budget <= spec.slo_ms &&
        (!best || cost < best_cost || (cost == best_cost && budget < best_budget))) {
      best = candidate;
      best_cost = cost;
      best_budget = budget;
    }
    // Odometer increment, last stage fastest.
    for (std::size_t s = stages; s-- > 0;) {
      if (++digit[s] < radix[s]) break;
      digit[s] = 0;
    }
  }
  if (!best) return std::nullopt;
  const auto kind = mode == SearchMode::Vertical ? PlanKind::Vertical : PlanKind::Horizontal;
  return assemble(spec, kind, std::move(*best), lambda_rps, lambda_rps, {});
}

double stage_capacity(const PipelineSpec& spec, const PipelinePlan& plan, std::size_t stage) {
  const auto& cfg = plan.stages.at(stage);
  return throughput(spec.stages.at(stage), cfg.batch, cfg.cores) * plan.total_instances(stage);
}

}  // namespace hvscale
