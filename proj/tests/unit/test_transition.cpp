#include <doctest.h>

#include <algorithm>
#include <random>

#include "hvscale/error.hpp"
#include "hvscale/transition.hpp"

using namespace hvscale;
using Kind = ScalingAction::Kind;

namespace {

ModelProfile example() { return {"example", 10.0, 40.0, 2.0, 5.0, 16, 16}; }
ModelProfile burst_profile() { return {"desk", 8.0, 2.0, 1.0, 1.0, 16, 16}; }

StageView stage_of(int batch, std::vector<int> cores, int first_id = 0) {
  StageView v;
  v.batch = batch;
  for (int c : cores) v.ready.push_back({first_id++, c});
  return v;
}

long count(const std::vector<ScalingAction>& actions, Kind kind) {
  return std::count_if(actions.begin(), actions.end(), [&](const auto& a) { return a.kind == kind; });
}

// Ready capacity of a stage with `cores` per instance at `batch`.
double capacity(const ModelProfile& p, int batch, const std::vector<int>& cores) {
  double total = 0.0;
  for (int c : cores) total += throughput(p, batch, c);
  return total;
}

}  // namespace

TEST_CASE("step: a serving config in steady state does nothing") {
  const PipelineSpec spec{"s", {example()}, 100};
  const LiveConfig live{stage_of(1, {1})};
  REQUIRE(live_capacity(spec, live, 0) >= 17.0);
  ControllerState state;
  const auto r = step(state, spec, 10, 10, live, 1000);
  CHECK(r.actions.empty());
  CHECK(r.state == state);
}

TEST_CASE("step: a burst the vertical solver can absorb only resizes") {
  const PipelineSpec spec{"s", {burst_profile()}, 1000};
  const LiveConfig live{stage_of(1, {1})};
  ControllerState state;
  const auto r = step(state, spec, 120, 120, live, 5000);
  CHECK(r.state.mode == ControllerMode::VerticalBurst);
  CHECK(count(r.actions, Kind::SpawnInstances) == 0);
  CHECK(count(r.actions, Kind::RetireInstances) == 0);
  CHECK(count(r.actions, Kind::SetCores) == 1);
  const auto plan = solve_vertical(spec, 120);
  REQUIRE(plan);
  for (const auto& a : r.actions) {
    if (a.kind == Kind::SetCores) CHECK(a.value == plan->stages[0].cores);
    if (a.kind == Kind::SetBatch) CHECK(a.value == plan->stages[0].batch);
    CHECK(a.issue_ms == 5000);
  }
  CHECK(r.state.pending_spawns.empty());
}

TEST_CASE("step: beyond the vertical limit maxes cores and spawns") {
  const PipelineSpec spec{"s", {example()}, 100};
  const LiveConfig live{stage_of(1, {1})};
  REQUIRE_FALSE(solve_vertical(spec, 400));
  const auto r = step(ControllerState{}, spec, 400, 400, live, 3000, ControllerConfig{5500});
  CHECK(r.state.mode == ControllerMode::HybridSpawning);
  REQUIRE(count(r.actions, Kind::SetCores) == 1);
  for (const auto& a : r.actions) {
    if (a.kind == Kind::SetCores) CHECK(a.value == 16);
  }
  REQUIRE(count(r.actions, Kind::SpawnInstances) == 1);
  const auto hybrid = solve_hybrid(spec, 400);
  const auto spawn = *std::find_if(r.actions.begin(), r.actions.end(),
                                   [](const auto& a) { return a.kind == Kind::SpawnInstances; });
  CHECK(spawn.value == hybrid->extra_instances[0]);
  REQUIRE(r.state.pending_spawns.size() == 1);
  CHECK(r.state.pending_spawns[0].ready_at_ms == 3000 + 5500);

  // Next tick, spawns still booting: no duplicate spawn requests.
  LiveConfig booting = live;
  booting[0].batch = hybrid->stages[0].batch;
  booting[0].ready[0].cores = 16;
  for (int i = 0; i < spawn.value; ++i) booting[0].booting.push_back({10 + i, spawn.cores});
  const auto r2 = step(r.state, spec, 400, 400, booting, 4000);
  CHECK(count(r2.actions, Kind::SpawnInstances) == 0);
  CHECK(r2.state.mode == ControllerMode::HybridSpawning);

  // Once the spawns are ready the hybrid ledger clears. The load is steady,
  // so the only spawns still pending belong to the horizontal handover.
  LiveConfig up = booting;
  for (auto& inst : up[0].booting) up[0].ready.push_back(inst);
  up[0].booting.clear();
  const auto r3 = step(r2.state, spec, 400, 400, up, 9000);
  CHECK(r3.state.mode != ControllerMode::HybridSpawning);
  for (const auto& p : r3.state.pending_spawns) CHECK(p.ready_at_ms == 9000 + 5500);
}

TEST_CASE("step: pending spawns exist only while spawning or handing over") {
  const PipelineSpec spec{"s", {burst_profile()}, 1000};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> rate(1, 400);
  ControllerState state;
  LiveConfig live{stage_of(1, {1})};
  for (std::int64_t t = 1000; t < 200000; t += 1000) {
    const double now = rate(rng);
    const auto r = step(state, spec, now, now * 1.1, live, t);
    state = r.state;
    CHECK((state.pending_spawns.empty() || state.mode == ControllerMode::HybridSpawning ||
           state.handover_in_flight()));
    // Apply the actions instantly so the next tick sees them.
    for (const auto& a : r.actions) {
      auto& v = live[static_cast<std::size_t>(a.stage)];
      if (a.kind == Kind::SetBatch) v.batch = a.value;
      if (a.kind == Kind::SetCores) {
        for (auto& i : v.ready) if (i.id == a.instance) i.cores = a.value;
      }
      if (a.kind == Kind::SpawnInstances) {
        for (int k = 0; k < a.value; ++k) v.ready.push_back({static_cast<int>(t) + k, a.cores});
      }
      if (a.kind == Kind::RetireInstances) {
        v.ready.resize(v.ready.size() - static_cast<std::size_t>(a.value));
      }
    }
  }
}

TEST_CASE("is_stable examples") {
  const PipelineSpec spec{"s", {example()}, 200};
  CHECK(is_stable(spec, 50, 50));
  CHECK(is_stable(spec, 50, 51));
  const auto a = solve_horizontal(spec, 100);
  const auto b = solve_horizontal(spec, 120);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->stages[0].instances != b->stages[0].instances);
  CHECK_FALSE(is_stable(spec, 100, 120));
  CHECK_FALSE(is_stable(PipelineSpec{"s", {example()}, 20}, 5, 5));
  CHECK_THROWS_AS(is_stable(spec, 0, 5), InvalidArgument);
}

TEST_CASE("v2h: two 3-core instances become four 1-core instances") {
  const LiveConfig live{stage_of(2, {3, 3})};
  PipelinePlan target;
  target.kind = PlanKind::Horizontal;
  target.stages = {{2, 1, 4}};
  target.extra_instances = {0};
  const auto actions = plan_v2h_transition(live, target, 7000);
  REQUIRE(actions.size() == 3);
  CHECK(actions[0].kind == Kind::SpawnInstances);
  CHECK(actions[0].value == 2);
  CHECK(actions[0].cores == 1);
  CHECK_FALSE(actions[0].await_spawns);
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(actions[i].kind == Kind::SetCores);
    CHECK(actions[i].value == 1);
    CHECK(actions[i].await_spawns);
  }
  CHECK(actions[1].instance == 0);
  CHECK(actions[2].instance == 1);
}

TEST_CASE("v2h: matching config needs no actions") {
  const LiveConfig live{stage_of(2, {1, 1})};
  PipelinePlan target;
  target.stages = {{2, 1, 2}};
  CHECK(plan_v2h_transition(live, target, 0).empty());
}

TEST_CASE("v2h: over-provisioned stages retire after downsizing") {
  const LiveConfig live{stage_of(1, {2, 2, 2})};
  PipelinePlan target;
  target.stages = {{1, 1, 2}};
  const auto actions = plan_v2h_transition(live, target, 0);
  REQUIRE(actions.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(actions[i].kind == Kind::SetCores);
  CHECK(actions[3].kind == Kind::RetireInstances);
  CHECK(actions[3].value == 1);
  for (const auto& a : actions) CHECK_FALSE(a.await_spawns);
}

TEST_CASE("v2h rejects multi-core targets") {
  PipelinePlan target;
  target.stages = {{1, 2, 2}};
  CHECK_THROWS_AS(plan_v2h_transition({stage_of(1, {1})}, target, 0), InvalidArgument);
}

TEST_CASE("handover keeps capacity above the target rate at every phase") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(0.5, 20.0);
  std::uniform_int_distribution<int> count_dist(1, 3);
  std::uniform_real_distribution<double> rate(5.0, 150.0);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const ModelProfile p{"r", coef(rng), coef(rng) * 3, coef(rng) / 4, coef(rng), 16, 16};
    const PipelineSpec spec{"r", {p}, 800};
    const double lambda = rate(rng);
    const int n = count_dist(rng);
    const int counts[] = {n};
    const auto vertical = solve_vertical(spec, lambda, counts);
    const auto target = solve_horizontal(spec, lambda);
    if (!vertical || !target) continue;
    const auto& vcfg = vertical->stages[0];
    const LiveConfig live{stage_of(vcfg.batch, std::vector<int>(static_cast<std::size_t>(n), vcfg.cores))};
    const auto actions = plan_v2h_transition(live, *target, 0);

    // Phase 1: only spawns take effect; old instances keep batch and cores.
    std::vector<int> cores(static_cast<std::size_t>(n), vcfg.cores);
    int batch = vcfg.batch;
    CHECK(capacity(p, batch, cores) >= lambda);
    for (const auto& a : actions) {
      if (a.await_spawns) continue;
      if (a.kind == Kind::SpawnInstances) cores.insert(cores.end(), static_cast<std::size_t>(a.value), 1);
    }
    // Spawned instances ready, old ones untouched.
    CHECK(capacity(p, batch, cores) >= lambda);
    // Phase 2 in order; batch switch lands before the delayed resize.
    for (const auto& a : actions) {
      if (a.kind == Kind::SetBatch) batch = a.value;
    }
    CHECK(capacity(p, batch, cores) >= lambda);
    for (const auto& a : actions) {
      if (a.kind == Kind::SetCores) cores[static_cast<std::size_t>(a.instance)] = a.value;
    }
    CHECK(capacity(p, batch, cores) >= lambda);
    for (const auto& a : actions) {
      if (a.kind == Kind::RetireInstances) cores.resize(cores.size() - static_cast<std::size_t>(a.value));
    }
    CHECK(capacity(p, batch, cores) >= lambda);
    CHECK(static_cast<int>(cores.size()) == target->stages[0].instances);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("h2v: all instances of a stage get the same cores") {
  PipelinePlan plan;
  plan.stages = {{1, 3, 2}};
  auto actions = plan_h2v_scaleup({stage_of(1, {1, 1})}, plan, 0);
  REQUIRE(actions.size() == 2);
  for (const auto& a : actions) {
    CHECK(a.kind == Kind::SetCores);
    CHECK(a.value == 3);
  }
  CHECK(actions[0].instance != actions[1].instance);

  plan.stages = {{1, 1, 2}};
  CHECK(plan_h2v_scaleup({stage_of(1, {1, 1})}, plan, 0).empty());

  plan.stages = {{4, 2, 4}};
  actions = plan_h2v_scaleup({stage_of(2, {1, 1, 1, 1})}, plan, 0);
  CHECK(count(actions, Kind::SetCores) == 4);
  CHECK(count(actions, Kind::SetBatch) == 1);
  for (const auto& a : actions) {
    if (a.kind == Kind::SetCores) CHECK(a.value == 2);
  }
}

TEST_CASE("step is deterministic") {
  const PipelineSpec spec{"s", {example(), burst_profile()}, 400};
  const LiveConfig live{stage_of(1, {1}), stage_of(1, {1}, 5)};
  for (double l : {5.0, 30.0, 90.0, 300.0}) {
    CHECK(step(ControllerState{}, spec, l, l * 1.5, live, 1000).actions ==
          step(ControllerState{}, spec, l, l * 1.5, live, 1000).actions);
  }
}

TEST_CASE("describe names the action") {
  CHECK(describe(ScalingAction::spawn(1, 2, 1, 50)) == "t=50ms SpawnInstances(stage=1, count=2, cores=1)");
  CHECK(describe(ScalingAction::set_cores(0, 3, 4, 0)) == "t=0ms SetCores(stage=0, instance=3, cores=4)");
}
