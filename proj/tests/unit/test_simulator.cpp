#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hvscale/error.hpp"
#include "hvscale/simulator.hpp"

using namespace hvscale;

namespace {

ModelProfile example() { return {"example", 10.0, 40.0, 2.0, 5.0, 16, 16}; }
ModelProfile burst_profile() { return {"desk", 8.0, 2.0, 1.0, 1.0, 16, 16}; }

Scenario burst(PolicyKind policy, std::uint64_t seed) {
  Scenario sc;
  sc.spec = {"burst", {burst_profile()}, 1000};
  for (int t = 0; t < 60; ++t) sc.trace.rps.push_back(t >= 20 && t < 25 ? 120 : 20);
  sc.policy = policy;
  sc.seed = seed;
  return sc;
}

void check_conservation(const SimReport& r) {
  CHECK(r.total_arrivals == r.served + r.dropped + r.in_flight_at_end);
  long rows = 0, drops = 0, violations = 0;
  for (const auto& s : r.seconds) {
    rows += s.rps;
    drops += s.drops;
    violations += s.violations;
  }
  CHECK(rows == r.total_arrivals);
  CHECK(drops == r.dropped);
  CHECK(violations == r.violations());
  CHECK(r.violation_rate >= 0.0);
  CHECK(r.violation_rate <= 1.0);
}

}  // namespace

TEST_CASE("should_drop thresholds") {
  CHECK(should_drop(0, 781, DropPolicy::AtSlo, 780));
  CHECK_FALSE(should_drop(0, 779, DropPolicy::AtSlo, 780));
  CHECK_FALSE(should_drop(0, 781, DropPolicy::At3xSlo, 780));
  CHECK(should_drop(0, 2341, DropPolicy::At3xSlo, 780));
  CHECK_FALSE(should_drop(0, 1e9, DropPolicy::Never, 780));
}

TEST_CASE("batch dispatch rule") {
  const double four[] = {0, 1, 2, 3};
  CHECK(batch_dispatch_rule(four, 4, 3, 1000) == std::optional<std::size_t>(4));
  // One request at 50 rps waits (b - 1) / lambda = 60 ms for a batch of 4.
  const double one[] = {100.0};
  const double bound = 1000.0 * 3 / 50;
  CHECK_FALSE(batch_dispatch_rule(one, 4, 100.0 + bound, bound));
  CHECK(batch_dispatch_rule(one, 4, 100.0 + bound + 0.5, bound) == std::optional<std::size_t>(1));
  CHECK_FALSE(batch_dispatch_rule(std::span<const double>{}, 4, 0, 0));
  CHECK_THROWS_AS(batch_dispatch_rule(one, 0, 0, 0), InvalidArgument);
}

TEST_CASE("underloaded static plan has no violations") {
  Scenario sc;
  // Capacity 17.5 rps against 10 rps Poisson arrivals; the SLO leaves room
  // for the queueing that Poisson bursts cause.
  sc.spec = {"steady", {example()}, 1000};
  sc.trace.rps.assign(60, 10);
  sc.policy = PolicyKind::Static;
  PipelinePlan plan;
  plan.stages = {{1, 1, 1}};
  plan.extra_instances = {0};
  sc.initial_plan = plan;
  const auto r = run(sc);
  CHECK(r.violation_rate == 0.0);
  CHECK(r.dropped == 0);
  CHECK(r.total_arrivals > 400);
  check_conservation(r);
  CHECK(r.actions.empty());
  CHECK(r.total_core_seconds == doctest::Approx(60.0));
  for (const auto& s : r.seconds) CHECK(s.cost_cores == doctest::Approx(1.0));
}

TEST_CASE("burst: horizontal-only violates during the cold start, vertical-only far less") {
  std::vector<long> h, v, j;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rh = run(burst(PolicyKind::HorizontalOnly, seed));
    const auto rv = run(burst(PolicyKind::VerticalOnly, seed));
    const auto rj = run(burst(PolicyKind::Joint, seed));
    for (const auto* r : {&rh, &rv, &rj}) check_conservation(*r);
    h.push_back(rh.violations());
    v.push_back(rv.violations());
    j.push_back(rj.violations());
  }
  const auto median = [](std::vector<long> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
  };
  MESSAGE("median violations horizontal=" << median(h) << " vertical=" << median(v)
                                          << " joint=" << median(j));
  CHECK(median(h) >= 50);
  // Bounded by the excess arrivals of the burst, 5 s at 100 rps over base.
  CHECK(median(h) <= 500);
  CHECK(median(v) * 3 <= median(h));
  CHECK(median(j) <= median(v));
}

TEST_CASE("runs are deterministic per seed and differ across seeds") {
  for (auto policy : {PolicyKind::Joint, PolicyKind::HorizontalOnly, PolicyKind::VerticalOnly}) {
    const auto a = run(burst(policy, 5));
    const auto b = run(burst(policy, 5));
    CHECK(a == b);
    const auto c = run(burst(policy, 6));
    CHECK(a.total_arrivals != c.total_arrivals);
  }
}

TEST_CASE("cost curve agrees with the per-instance ledger") {
  for (auto policy : {PolicyKind::Joint, PolicyKind::HorizontalOnly, PolicyKind::VerticalOnly}) {
    const auto r = run(burst(policy, 2));
    CHECK(r.total_core_seconds == doctest::Approx(r.instance_core_seconds).epsilon(1e-9));
    double sum = 0.0;
    for (const auto& s : r.seconds) sum += s.cost_cores;
    CHECK(sum == doctest::Approx(r.total_core_seconds).epsilon(1e-9));
  }
}

TEST_CASE("instances never overlap batches or start early") {
  for (auto policy : {PolicyKind::Joint, PolicyKind::HorizontalOnly, PolicyKind::VerticalOnly}) {
    const auto r = run(burst(policy, 3));
    CHECK(r.max_concurrent_batches == 1);
    CHECK(r.early_dispatches == 0);
  }
}

TEST_CASE("AtSlo bounds served latency by the SLO plus one batch") {
  for (auto policy : {PolicyKind::Joint, PolicyKind::HorizontalOnly, PolicyKind::VerticalOnly}) {
    auto sc = burst(policy, 4);
    sc.drop_policy = DropPolicy::AtSlo;
    const auto r = run(sc);
    CHECK(r.max_served_latency_ms <= sc.spec.slo_ms + r.max_batch_latency_ms);
  }
}

TEST_CASE("joint policy hands back to horizontal after the burst") {
  auto sc = burst(PolicyKind::Joint, 1);
  sc.trace.rps.assign(120, 20);
  for (int t = 20; t < 40; ++t) sc.trace.rps[static_cast<std::size_t>(t)] = 120;
  const auto r = run(sc);
  bool burst_seen = false, back = false;
  for (const auto& c : r.control) {
    if (c.mode == ControllerMode::VerticalBurst) burst_seen = true;
    if (burst_seen && c.mode == ControllerMode::HorizontalSteady) back = true;
  }
  CHECK(burst_seen);
  CHECK(back);
  CHECK(r.control.back().mode == ControllerMode::HorizontalSteady);
}

TEST_CASE("scenario validation") {
  auto sc = burst(PolicyKind::Joint, 1);
  sc.trace.rps.clear();
  CHECK_THROWS_AS(run(sc), ConfigError);
  sc = burst(PolicyKind::Static, 1);
  CHECK_THROWS_AS(run(sc), ConfigError);
  sc = burst(PolicyKind::Joint, 1);
  sc.timing.cold_start_ms = 0;
  CHECK_THROWS_AS(run(sc), ConfigError);
  sc = burst(PolicyKind::Joint, 1);
  sc.spec.slo_ms = 0;
  CHECK_THROWS_AS(run(sc), ConfigError);
  sc = burst(PolicyKind::Joint, 1);
  PipelinePlan bad;
  bad.stages = {{17, 1, 1}};
  sc.initial_plan = bad;
  CHECK_THROWS_AS(run(sc), ConfigError);
}

TEST_CASE("multi-stage pipelines conserve requests under every drop policy") {
  Scenario sc;
  sc.spec = {"pair", {burst_profile(), example()}, 780};
  for (int t = 0; t < 90; ++t) sc.trace.rps.push_back(t % 30 < 5 ? 90 : 15);
  for (auto drop : {DropPolicy::AtSlo, DropPolicy::At3xSlo, DropPolicy::Never}) {
    for (auto policy : {PolicyKind::Joint, PolicyKind::HorizontalOnly, PolicyKind::VerticalOnly}) {
      sc.drop_policy = drop;
      sc.policy = policy;
      check_conservation(run(sc));
    }
  }
}

TEST_CASE("draining the backlog cuts violations after a step surge") {
  Scenario sc;
  sc.spec = {"video",
             {ModelProfile{"det", 20, 10, 2, 4, 16, 8}, ModelProfile{"cls", 8, 4, 1, 2, 16, 8}},
             780};
  for (int t = 0; t < 120; ++t) sc.trace.rps.push_back(t < 60 ? 45 : 270);
  long with = 0, without = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    sc.seed = seed;
    sc.backlog_drain = true;
    const auto a = run(sc);
    sc.backlog_drain = false;
    const auto b = run(sc);
    check_conservation(a);
    check_conservation(b);
    with += a.violations();
    without += b.violations();
  }
  MESSAGE("violations with drain=" << with << " without=" << without);
  CHECK(with < without);
}
