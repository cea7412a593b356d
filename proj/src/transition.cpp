#include "hvscale/transition.hpp"

#include <algorithm>
#include <sstream>

#include "hvscale/error.hpp"

namespace hvscale {
namespace {

// Silent seconds still drive the solvers with a tiny positive rate.
constexpr double kMinRate = 1e-3;

std::vector<int> ready_counts(const LiveConfig& live) {
  std::vector<int> counts;
  for (const auto& s : live) counts.push_back(static_cast<int>(s.ready.size()));
  return counts;
}

int pending_for(const ControllerState& state, int stage) {
  int n = 0;
  for (const auto& p : state.pending_spawns) {
    if (p.stage == stage) n += p.count;
  }
  return n;
}

void append(std::vector<ScalingAction>& to, const std::vector<ScalingAction>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

}  // namespace

const char* to_string(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::HorizontalSteady:
      return "horizontal";
    case ControllerMode::VerticalBurst:
      return "vertical";
    case ControllerMode::HybridSpawning:
      return "hybrid";
  }
  return "unknown";
}

ScalingAction ScalingAction::set_cores(int stage, int instance, int cores, std::int64_t issue_ms) {
  return {Kind::SetCores, stage, instance, cores, 0, issue_ms, false};
}

ScalingAction ScalingAction::set_batch(int stage, int batch, std::int64_t issue_ms) {
  return {Kind::SetBatch, stage, -1, batch, 0, issue_ms, false};
}

ScalingAction ScalingAction::spawn(int stage, int count, int cores, std::int64_t issue_ms) {
  return {Kind::SpawnInstances, stage, -1, count, cores, issue_ms, false};
}

ScalingAction ScalingAction::retire(int stage, int count, std::int64_t issue_ms) {
  return {Kind::RetireInstances, stage, -1, count, 0, issue_ms, false};
}

std::string describe(const ScalingAction& a) {
  std::ostringstream out;
  out << "t=" << a.issue_ms << "ms ";
  switch (a.kind) {
    case ScalingAction::Kind::SetCores:
      out << "SetCores(stage=" << a.stage << ", instance=" << a.instance << ", cores=" << a.value
          << ")";
      break;
    case ScalingAction::Kind::SetBatch:
      out << "SetBatch(stage=" << a.stage << ", batch=" << a.value << ")";
      break;
    case ScalingAction::Kind::SpawnInstances:
      out << "SpawnInstances(stage=" << a.stage << ", count=" << a.value << ", cores=" << a.cores
          << ")";
      break;
    case ScalingAction::Kind::RetireInstances:
      out << "RetireInstances(stage=" << a.stage << ", count=" << a.value << ")";
      break;
  }
  if (a.await_spawns) out << " [after spawns]";
  return out.str();
}

bool is_stable(const PipelineSpec& spec, double lambda_now, double lambda_pred) {
  if (!(lambda_now > 0.0) || !(lambda_pred > 0.0)) {
    throw InvalidArgument("is_stable needs positive rates");
  }
  const auto now = solve_horizontal(spec, lambda_now);
  if (!now) return false;
  const auto pred = solve_horizontal(spec, lambda_pred);
  if (!pred) return false;
  for (std::size_t s = 0; s < now->stages.size(); ++s) {
    if (now->stages[s].batch != pred->stages[s].batch ||
        now->stages[s].instances != pred->stages[s].instances) {
      return false;
    }
  }
  return true;
}

double live_capacity(const PipelineSpec& spec, const LiveConfig& live, std::size_t stage) {
  const auto& view = live.at(stage);
  double total = 0.0;
  for (const auto& inst : view.ready) total += throughput(spec.stages.at(stage), view.batch, inst.cores);
  return total;
}

bool live_config_serves(const PipelineSpec& spec, const LiveConfig& live, double lambda) {
  if (live.size() != spec.stages.size()) throw InvalidArgument("live config / spec stage mismatch");
  long budget = 0;
  for (std::size_t s = 0; s < live.size(); ++s) {
    const auto& view = live[s];
    if (view.ready.empty()) return false;
    if (live_capacity(spec, live, s) < lambda) return false;
    int slowest = view.ready.front().cores;
    for (const auto& inst : view.ready) slowest = std::min(slowest, inst.cores);
    budget += stage_budget_ms(spec.stages[s], view.batch, slowest, std::max(lambda, kMinRate));
  }
  return budget <= spec.slo_ms;
}

std::vector<ScalingAction> plan_v2h_transition(const LiveConfig& current,
                                               const PipelinePlan& target,
                                               std::int64_t issue_ms) {
  if (current.size() != target.stages.size()) {
    throw InvalidArgument("live config / plan stage mismatch");
  }
  std::vector<ScalingAction> spawns;
  std::vector<ScalingAction> follow_up;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const int s = static_cast<int>(i);
    const auto& view = current[i];
    const auto& cfg = target.stages[i];
    if (cfg.cores != 1) throw InvalidArgument("handover target must use 1-core instances");
    const int have = static_cast<int>(view.ready.size() + view.booting.size());
    const int want = target.total_instances(i);
    if (want > have) spawns.push_back(ScalingAction::spawn(s, want - have, 1, issue_ms));
    if (view.batch != cfg.batch) follow_up.push_back(ScalingAction::set_batch(s, cfg.batch, issue_ms));
    for (const auto* group : {&view.ready, &view.booting}) {
      for (const auto& inst : *group) {
        if (inst.cores != 1) follow_up.push_back(ScalingAction::set_cores(s, inst.id, 1, issue_ms));
      }
    }
    if (want < have) follow_up.push_back(ScalingAction::retire(s, have - want, issue_ms));
  }
  // Instances already booting count toward the target, so the second phase
  // waits for them as well.
  bool booting = false;
  for (const auto& view : current) booting = booting || !view.booting.empty();
  if (!spawns.empty() || booting) {
    for (auto& a : follow_up) a.await_spawns = true;
  }
  append(spawns, follow_up);
  return spawns;
}

std::vector<ScalingAction> plan_h2v_scaleup(const LiveConfig& current,
                                            const PipelinePlan& vertical_plan,
                                            std::int64_t issue_ms) {
  if (current.size() != vertical_plan.stages.size()) {
    throw InvalidArgument("live config / plan stage mismatch");
  }
  std::vector<ScalingAction> actions;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const int s = static_cast<int>(i);
    const auto& view = current[i];
    const auto& cfg = vertical_plan.stages[i];
    for (const auto* group : {&view.ready, &view.booting}) {
      for (const auto& inst : *group) {
        if (inst.cores != cfg.cores) {
          actions.push_back(ScalingAction::set_cores(s, inst.id, cfg.cores, issue_ms));
        }
      }
    }
    if (view.batch != cfg.batch) actions.push_back(ScalingAction::set_batch(s, cfg.batch, issue_ms));
  }
  return actions;
}

StepResult step(const ControllerState& state, const PipelineSpec& spec, double lambda_now,
                double lambda_pred, const LiveConfig& live, std::int64_t now_ms,
                const ControllerConfig& config) {
  if (live.size() != spec.stages.size()) throw InvalidArgument("live config / spec stage mismatch");
  StepResult out{state, {}};
  auto& st = out.state;

  std::erase_if(st.pending_spawns, [&](const PendingSpawn& p) { return p.ready_at_ms <= now_ms; });
  if (st.mode == ControllerMode::HybridSpawning && st.pending_spawns.empty()) {
    st.mode = ControllerMode::VerticalBurst;
  }

  const double now_rate = std::max(lambda_now, kMinRate);
  const double pred_rate = std::max(lambda_pred, kMinRate);
  const double target = std::max(now_rate, pred_rate);

  auto record_spawns = [&](const std::vector<ScalingAction>& actions) {
    for (const auto& a : actions) {
      if (a.kind == ScalingAction::Kind::SpawnInstances) {
        st.pending_spawns.push_back({a.stage, a.value, a.cores, now_ms + config.cold_start_ms});
      }
    }
  };

  if (live_config_serves(spec, live, target)) {
    if (st.handover_in_flight()) {
      bool booting = false;
      for (const auto& v : live) booting = booting || !v.booting.empty();
      if (st.pending_spawns.empty() && !booting) {
        for (auto a : st.deferred) {
          a.issue_ms = now_ms;
          a.await_spawns = false;
          out.actions.push_back(a);
        }
        st.deferred.clear();
      }
      return out;
    }
    if (!is_stable(spec, now_rate, pred_rate)) return out;
    const auto horizontal = solve_horizontal(spec, target);
    if (!horizontal) return out;
    if (st.mode == ControllerMode::HorizontalSteady) {
      // Steady state only applies plans that need no extra instances.
      bool changes = false;
      for (std::size_t s = 0; s < live.size(); ++s) {
        const int have = static_cast<int>(live[s].ready.size() + live[s].booting.size());
        if (horizontal->total_instances(s) > have) return out;
        changes = changes || horizontal->total_instances(s) < have ||
                  horizontal->stages[s].batch != live[s].batch;
      }
      if (!changes) return out;
    }
    auto actions = plan_v2h_transition(live, *horizontal, now_ms);
    st.mode = ControllerMode::HorizontalSteady;
    for (const auto& a : actions) {
      if (a.await_spawns) {
        st.deferred.push_back(a);
      } else {
        out.actions.push_back(a);
      }
    }
    record_spawns(out.actions);
    return out;
  }

  // Capacity shortfall: abandon any half-done handover and scale up.
  st.deferred.clear();

  if (st.mode == ControllerMode::HybridSpawning) {
    // Spawns already on their way cover the forecast; wait for them.
    bool covered = true;
    for (std::size_t s = 0; s < live.size() && covered; ++s) {
      double prospective = live_capacity(spec, live, s);
      for (const auto& inst : live[s].booting) {
        prospective += throughput(spec.stages[s], live[s].batch, inst.cores);
      }
      covered = prospective >= target;
    }
    if (covered) return out;
  }

  // Scale-ups resize the instances that are serving; booting ones keep the
  // size they were requested with.
  LiveConfig ready_only = live;
  for (auto& v : ready_only) v.booting.clear();

  auto counts = ready_counts(live);
  const bool any_empty = std::any_of(counts.begin(), counts.end(), [](int n) { return n == 0; });
  if (!any_empty) {
    if (auto vertical = solve_vertical(spec, target, counts)) {
      out.actions = plan_h2v_scaleup(ready_only, *vertical, now_ms);
      st.mode = st.pending_spawns.empty() ? ControllerMode::VerticalBurst
                                          : ControllerMode::HybridSpawning;
      return out;
    }
  } else {
    std::replace(counts.begin(), counts.end(), 0, 1);
  }

  auto plan = any_empty ? solve_vertical(spec, target, counts) : std::nullopt;
  if (!plan) plan = solve_hybrid(spec, target, counts);

  if (!plan) {
    // The SLO is out of reach at any rate: best effort with every instance
    // at its core limit.
    for (std::size_t i = 0; i < live.size(); ++i) {
      const int cmax = spec.stages[i].c_max;
      for (const auto& inst : live[i].ready) {
        if (inst.cores != cmax) {
          out.actions.push_back(ScalingAction::set_cores(static_cast<int>(i), inst.id, cmax, now_ms));
        }
      }
    }
    st.mode = st.pending_spawns.empty() ? ControllerMode::VerticalBurst
                                        : ControllerMode::HybridSpawning;
    return out;
  }

  // Existing instances go to their core limit; the plan's (b, c) sizes the
  // spawned tier.
  auto maxed = *plan;
  for (std::size_t i = 0; i < live.size(); ++i) maxed.stages[i].cores = spec.stages[i].c_max;
  out.actions = plan_h2v_scaleup(ready_only, maxed, now_ms);
  for (std::size_t i = 0; i < live.size(); ++i) {
    const int s = static_cast<int>(i);
    const int wanted = plan->total_instances(i) - static_cast<int>(live[i].ready.size());
    const int on_the_way =
        std::max(pending_for(st, s), static_cast<int>(live[i].booting.size()));
    if (wanted > on_the_way) {
      out.actions.push_back(ScalingAction::spawn(s, wanted - on_the_way, plan->stages[i].cores, now_ms));
    }
  }
  record_spawns(out.actions);
  st.mode = st.pending_spawns.empty() ? ControllerMode::VerticalBurst
                                      : ControllerMode::HybridSpawning;
  return out;
}

}  // namespace hvscale
