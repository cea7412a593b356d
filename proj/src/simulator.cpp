#include "hvscale/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <random>
#include <stdexcept>

#include "hvscale/error.hpp"
#include "hvscale/queueing.hpp"

namespace hvscale {
namespace {

// Flush timers fire just after the deadline so the strict "waited longer
// than" test in batch_dispatch_rule passes.
constexpr double kTimerNudgeMs = 1e-6;
constexpr double kMinRate = 1e-3;

std::optional<std::size_t> dispatch_count(std::size_t queued, double head_enqueue_ms, int batch,
                                          double now_ms, double flush_after_ms) {
  if (queued == 0) return std::nullopt;
  const auto full = static_cast<std::size_t>(batch);
  if (queued >= full) return full;
  if (now_ms - head_enqueue_ms > flush_after_ms) return queued;
  return std::nullopt;
}

double p99(std::vector<double>& latencies) {
  if (latencies.empty()) return 0.0;
  std::sort(latencies.begin(), latencies.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(latencies.size())));
  return latencies[std::max<std::size_t>(rank, 1) - 1];
}

enum class EventKind { BatchDone, Tick, CoresEffective, SpawnReady, FlushCheck };

struct Event {
  double t_ms;
  std::uint64_t seq;
  EventKind kind;
  int target;
  std::uint64_t token;
};

struct LaterFirst {
  bool operator()(const Event& a, const Event& b) const {
    return a.t_ms != b.t_ms ? a.t_ms > b.t_ms : a.seq > b.seq;
  }
};

enum class Status { InFlight, Served, Dropped };

struct Request {
  double arrival_ms = 0.0;
  Status status = Status::InFlight;
  double done_ms = 0.0;
  // Per stage: entered the queue, left it in a batch, batch finished.
  std::vector<double> enqueue_ms;
  std::vector<double> dispatch_ms;
  std::vector<double> finish_ms;
};

struct Instance {
  int id = 0;
  int stage = 0;
  int cores = 1;
  // Cores after any pending in-place resize.
  int committed_cores = 1;
  double ready_ms = 0.0;
  bool alive = true;
  bool busy = false;
  bool retiring = false;
  std::uint64_t resize_token = 0;
  std::vector<int> batch;
  // Per-instance cost ledger, independent of the global allocation curve.
  double ledger_mark_ms = 0.0;
  double ledger_core_ms = 0.0;
};

struct StageRuntime {
  std::deque<int> queue;
  int batch = 1;
  double flush_after_ms = 0.0;
  std::vector<int> members;
  std::size_t round_robin = 0;
  double flush_timer_ms = -1.0;
};

struct DeferredGroup {
  std::vector<int> waiting;
  std::vector<ScalingAction> actions;
};

class Engine {
 public:
  explicit Engine(const Scenario& scenario)
      : sc_(scenario),
        spec_(scenario.spec),
        horizon_ms_(1000.0 * static_cast<double>(scenario.trace.rps.size())),
        predictor_(scenario.predictor),
        stages_(scenario.spec.stages.size()),
        cost_seconds_(scenario.trace.rps.size(), 0.0) {}

  SimReport run() {
    generate_arrivals();
    deploy_initial();
    push(static_cast<double>(sc_.timing.control_period_ms), EventKind::Tick, 0);
    const double stop_ms = horizon_ms_ + static_cast<double>(sc_.timing.drain_limit_ms);
    std::size_t next_arrival = 0;
    while (true) {
      const bool have_arrival = next_arrival < requests_.size();
      const bool have_event = !events_.empty();
      if (!have_arrival && !have_event) break;
      if (have_arrival && (!have_event || requests_[next_arrival].arrival_ms <= events_.top().t_ms)) {
        const int id = static_cast<int>(next_arrival++);
        now_ = requests_[static_cast<std::size_t>(id)].arrival_ms;
        enqueue(0, id);
        try_dispatch(0);
        continue;
      }
      const Event ev = events_.top();
      if (ev.t_ms > stop_ms) break;
      events_.pop();
      now_ = ev.t_ms;
      handle(ev);
    }
    return assemble();
  }

 private:
  // ---- setup -------------------------------------------------------------

  void generate_arrivals() {
    std::mt19937_64 rng(sc_.seed);
    std::uniform_real_distribution<double> offset(0.0, 1000.0);
    const std::size_t stage_count = stages_.size();
    for (std::size_t t = 0; t < sc_.trace.rps.size(); ++t) {
      const int mean = sc_.trace.rps[t];
      if (mean <= 0) continue;
      std::poisson_distribution<long> count(static_cast<double>(mean));
      const long n = count(rng);
      std::vector<double> times(static_cast<std::size_t>(n));
      for (auto& x : times) x = 1000.0 * static_cast<double>(t) + offset(rng);
      std::sort(times.begin(), times.end());
      for (double x : times) {
        Request r;
        r.arrival_ms = x;
        r.enqueue_ms.assign(stage_count, 0.0);
        r.dispatch_ms.assign(stage_count, 0.0);
        r.finish_ms.assign(stage_count, 0.0);
        requests_.push_back(std::move(r));
      }
    }
  }

  PipelinePlan initial_plan() const {
    if (sc_.initial_plan) return *sc_.initial_plan;
    const double rate = std::max(1.0, static_cast<double>(sc_.trace.rps.front()));
    std::optional<PipelinePlan> plan;
    if (sc_.policy == PolicyKind::VerticalOnly) {
      plan = solve_vertical_or_hybrid(spec_, rate);
      if (plan) plan->extra_instances.assign(spec_.stages.size(), 0);
    } else {
      plan = solve_horizontal(spec_, rate);
    }
    if (plan) return *plan;
    PipelinePlan fallback;
    for (const auto& p : spec_.stages) {
      fallback.stages.push_back({1, sc_.policy == PolicyKind::VerticalOnly ? p.c_max : 1, 1});
    }
    fallback.extra_instances.assign(spec_.stages.size(), 0);
    return fallback;
  }

  void deploy_initial() {
    const auto plan = initial_plan();
    plan_rate_ = std::max(1.0, static_cast<double>(sc_.trace.rps.front()));
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      stages_[s].batch = plan.stages[s].batch;
      update_flush(s, plan_rate_);
      for (int i = 0; i < plan.total_instances(s); ++i) {
        create_instance(static_cast<int>(s), plan.stages[s].cores, 0.0);
      }
    }
  }

  // ---- events ------------------------------------------------------------

  void push(double t, EventKind kind, int target, std::uint64_t token = 0) {
    events_.push({t, seq_++, kind, target, token});
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case EventKind::BatchDone:
        on_batch_done(ev.target);
        break;
      case EventKind::Tick:
        on_tick();
        break;
      case EventKind::CoresEffective: {
        auto& inst = instances_[static_cast<std::size_t>(ev.target)];
        if (inst.alive && inst.resize_token == ev.token) set_cores_now(inst, inst.committed_cores);
        break;
      }
      case EventKind::SpawnReady:
        on_spawn_ready(ev.target);
        break;
      case EventKind::FlushCheck: {
        auto& stage = stages_[static_cast<std::size_t>(ev.target)];
        if (stage.flush_timer_ms == ev.t_ms) stage.flush_timer_ms = -1.0;
        try_dispatch(static_cast<std::size_t>(ev.target));
        break;
      }
    }
  }

  // ---- cost accounting ---------------------------------------------------

  void advance_cost() {
    const double until = std::min(now_, horizon_ms_);
    double t = cost_mark_ms_;
    while (t < until) {
      const auto second = static_cast<std::size_t>(t / 1000.0);
      const double edge = std::min(until, 1000.0 * static_cast<double>(second + 1));
      cost_seconds_[second] += allocated_cores_ * (edge - t) / 1000.0;
      t = edge;
    }
    cost_mark_ms_ = std::max(cost_mark_ms_, until);
  }

  void settle_ledger(Instance& inst) {
    const double until = std::min(now_, horizon_ms_);
    if (until > inst.ledger_mark_ms) {
      inst.ledger_core_ms += inst.cores * (until - inst.ledger_mark_ms);
      inst.ledger_mark_ms = until;
    }
  }

  int create_instance(int stage, int cores, double ready_ms) {
    advance_cost();
    Instance inst;
    inst.id = static_cast<int>(instances_.size());
    inst.stage = stage;
    inst.cores = inst.committed_cores = cores;
    inst.ready_ms = ready_ms;
    inst.ledger_mark_ms = std::min(now_, horizon_ms_);
    instances_.push_back(inst);
    stages_[static_cast<std::size_t>(stage)].members.push_back(inst.id);
    allocated_cores_ += cores;
    return inst.id;
  }

  void set_cores_now(Instance& inst, int cores) {
    advance_cost();
    settle_ledger(inst);
    allocated_cores_ += cores - inst.cores;
    inst.cores = cores;
  }

  void remove_instance(Instance& inst) {
    advance_cost();
    settle_ledger(inst);
    allocated_cores_ -= inst.cores;
    inst.alive = false;
    auto& members = stages_[static_cast<std::size_t>(inst.stage)].members;
    std::erase(members, inst.id);
  }

  // ---- queues and dispatch -----------------------------------------------

  void update_flush(std::size_t s, double lambda) {
    auto& stage = stages_[s];
    stage.flush_after_ms = queue_delay(stage.batch, std::max(lambda, 1.0)) + sc_.timing.flush_slack_ms;
  }

  void enqueue(std::size_t s, int id) {
    requests_[static_cast<std::size_t>(id)].enqueue_ms[s] = now_;
    stages_[s].queue.push_back(id);
  }

  void drop(int id) {
    auto& r = requests_[static_cast<std::size_t>(id)];
    r.status = Status::Dropped;
    r.done_ms = now_;
  }

  bool stale(int id) const {
    return should_drop(requests_[static_cast<std::size_t>(id)].arrival_ms, now_, sc_.drop_policy,
                       spec_.slo_ms);
  }

  Instance* next_idle(StageRuntime& stage) {
    const std::size_t n = stage.members.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t pos = (stage.round_robin + k) % n;
      auto& inst = instances_[static_cast<std::size_t>(stage.members[pos])];
      if (inst.alive && !inst.busy && !inst.retiring && inst.ready_ms <= now_) {
        stage.round_robin = pos + 1;
        return &inst;
      }
    }
    return nullptr;
  }

  void try_dispatch(std::size_t s) {
    auto& stage = stages_[s];
    while (true) {
      while (!stage.queue.empty() && stale(stage.queue.front())) {
        drop(stage.queue.front());
        stage.queue.pop_front();
      }
      if (stage.queue.empty()) return;
      const double head = requests_[static_cast<std::size_t>(stage.queue.front())].enqueue_ms[s];
      const auto take = dispatch_count(stage.queue.size(), head, stage.batch, now_, stage.flush_after_ms);
      if (!take) {
        const double deadline = head + stage.flush_after_ms + kTimerNudgeMs;
        if (!(stage.flush_timer_ms > now_ && stage.flush_timer_ms <= deadline) &&
            std::isfinite(deadline)) {
          stage.flush_timer_ms = deadline;
          push(deadline, EventKind::FlushCheck, static_cast<int>(s));
        }
        return;
      }
      Instance* inst = next_idle(stage);
      if (inst == nullptr) return;
      std::vector<int> batch;
      while (batch.size() < *take && !stage.queue.empty()) {
        const int id = stage.queue.front();
        stage.queue.pop_front();
        if (stale(id)) {
          drop(id);
        } else {
          batch.push_back(id);
        }
      }
      if (batch.empty()) continue;
      start_batch(*inst, std::move(batch));
    }
  }

  void start_batch(Instance& inst, std::vector<int> batch) {
    if (inst.busy) ++concurrent_violations_;
    ++batches_started_;
    if (now_ < inst.ready_ms) ++early_dispatches_;
    const auto& profile = spec_.stages[static_cast<std::size_t>(inst.stage)];
    const int size = std::min(static_cast<int>(batch.size()), profile.b_max);
    const double duration = latency(profile, size, inst.cores);
    max_batch_latency_ms_ = std::max(max_batch_latency_ms_, duration);
    for (int id : batch) requests_[static_cast<std::size_t>(id)].dispatch_ms[static_cast<std::size_t>(inst.stage)] = now_;
    inst.busy = true;
    inst.batch = std::move(batch);
    push(now_ + duration, EventKind::BatchDone, inst.id);
  }

  void on_batch_done(int instance_id) {
    auto& inst = instances_[static_cast<std::size_t>(instance_id)];
    const auto s = static_cast<std::size_t>(inst.stage);
    const bool last = s + 1 == stages_.size();
    for (int id : inst.batch) {
      auto& r = requests_[static_cast<std::size_t>(id)];
      r.finish_ms[s] = now_;
      if (last) {
        r.status = Status::Served;
        r.done_ms = now_;
        check_timeline(r);
      } else {
        enqueue(s + 1, id);
      }
    }
    inst.batch.clear();
    inst.busy = false;
    if (inst.retiring) remove_instance(inst);
    if (!last) try_dispatch(s + 1);
    try_dispatch(s);
  }

  void check_timeline(const Request& r) const {
    double t = r.arrival_ms;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      if (r.enqueue_ms[s] < t || r.dispatch_ms[s] < r.enqueue_ms[s] || r.finish_ms[s] < r.dispatch_ms[s]) {
        throw std::logic_error("request timestamps out of order");
      }
      t = r.finish_ms[s];
    }
  }

  void on_spawn_ready(int instance_id) {
    auto& inst = instances_[static_cast<std::size_t>(instance_id)];
    for (auto& group : deferred_) std::erase(group.waiting, instance_id);
    std::vector<ScalingAction> released;
    std::erase_if(deferred_, [&](DeferredGroup& g) {
      if (!g.waiting.empty()) return false;
      released.insert(released.end(), g.actions.begin(), g.actions.end());
      return true;
    });
    if (!released.empty()) {
      for (auto& a : released) a.await_spawns = false;
      apply(released);
    }
    if (inst.alive) try_dispatch(static_cast<std::size_t>(inst.stage));
  }

  // ---- control -----------------------------------------------------------

  LiveConfig live_view() const {
    LiveConfig live(stages_.size());
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      live[s].batch = stages_[s].batch;
      for (int id : stages_[s].members) {
        const auto& inst = instances_[static_cast<std::size_t>(id)];
        if (!inst.alive || inst.retiring) continue;
        InstanceView view{inst.id, inst.committed_cores};
        (inst.ready_ms <= now_ ? live[s].ready : live[s].booting).push_back(view);
      }
    }
    return live;
  }

  void on_tick() {
    const double period = static_cast<double>(sc_.timing.control_period_ms);
    const double from = now_ - period;
    while (tick_cursor_ < requests_.size() && requests_[tick_cursor_].arrival_ms < from) ++tick_cursor_;
    std::size_t end = tick_cursor_;
    while (end < requests_.size() && requests_[end].arrival_ms < now_) ++end;
    const double lambda_now = static_cast<double>(end - tick_cursor_) * 1000.0 / period;
    tick_cursor_ = end;

    predictor_.observe(tick_index_++, lambda_now);
    const double lambda_pred = predictor_.predict_max(sc_.horizon_s);

    const auto live = live_view();
    const auto now_ms = static_cast<std::int64_t>(std::llround(now_));
    std::vector<ScalingAction> actions;
    ControlRecord rec;
    rec.t_ms = now_ms;
    rec.lambda_now = lambda_now;
    rec.lambda_pred = lambda_pred;
    rec.stable = is_stable(spec_, std::max(lambda_now, kMinRate), std::max(lambda_pred, kMinRate));

    const double drain = sc_.backlog_drain ? backlog_rate(live, period) : 0.0;
    const double forecast = std::max(lambda_now, lambda_pred) + drain;
    const double baseline_rate =
        sc_.baseline_rate == BaselineRate::Forecast ? forecast : lambda_now + drain;
    // Partial batches are flushed on the queueing delay of the rate the
    // policy sized its plan for, which is what its latency budget assumed.
    plan_rate_ = sc_.policy == PolicyKind::Joint ? forecast : baseline_rate;
    for (std::size_t s = 0; s < stages_.size(); ++s) update_flush(s, plan_rate_);
    switch (sc_.policy) {
      case PolicyKind::Static:
        rec.mode = ControllerMode::HorizontalSteady;
        break;
      case PolicyKind::HorizontalOnly:
        actions = horizontal_policy(live, baseline_rate, now_ms);
        rec.mode = ControllerMode::HorizontalSteady;
        break;
      case PolicyKind::VerticalOnly:
        actions = vertical_policy(live, baseline_rate, now_ms);
        rec.mode = ControllerMode::VerticalBurst;
        break;
      case PolicyKind::Joint: {
        auto result = step(controller_, spec_, lambda_now + drain, lambda_pred, live, now_ms,
                           ControllerConfig{sc_.timing.cold_start_ms});
        controller_ = std::move(result.state);
        actions = std::move(result.actions);
        rec.mode = controller_.mode;
        break;
      }
    }
    apply(actions);
    rec.actions = static_cast<int>(actions.size());
    rec.allocated_cores = allocated_cores_;
    control_.push_back(rec);
    action_log_.insert(action_log_.end(), actions.begin(), actions.end());

    const double next = now_ + period;
    if (next <= horizon_ms_) push(next, EventKind::Tick, 0);
  }

  // Arrival rate that would clear the first stage requests one dispatch
  // round cannot take, within one control period.
  double backlog_rate(const LiveConfig& live, double period_ms) const {
    const auto& stage = stages_.front();
    const auto round = static_cast<double>(stage.batch) *
                       static_cast<double>(std::max<std::size_t>(1, live.front().ready.size()));
    const double excess = static_cast<double>(stage.queue.size()) - round;
    return excess > 0.0 ? excess * 1000.0 / period_ms : 0.0;
  }

  std::vector<ScalingAction> horizontal_policy(const LiveConfig& live, double lambda,
                                               std::int64_t now_ms) const {
    std::vector<ScalingAction> actions;
    const auto plan = solve_horizontal(spec_, std::max(lambda, kMinRate));
    if (!plan) return actions;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const int s = static_cast<int>(i);
      const int have = static_cast<int>(live[i].ready.size() + live[i].booting.size());
      const int want = plan->stages[i].instances;
      if (want > have) actions.push_back(ScalingAction::spawn(s, want - have, 1, now_ms));
      if (want < have) actions.push_back(ScalingAction::retire(s, have - want, now_ms));
      if (live[i].batch != plan->stages[i].batch) {
        actions.push_back(ScalingAction::set_batch(s, plan->stages[i].batch, now_ms));
      }
    }
    return actions;
  }

  std::vector<ScalingAction> vertical_policy(const LiveConfig& live, double lambda,
                                             std::int64_t now_ms) const {
    std::vector<int> counts;
    for (const auto& v : live) counts.push_back(std::max<int>(1, static_cast<int>(v.ready.size())));
    // Without spawning, the vertical tier of the hybrid plan is the best
    // this policy can do when the load exceeds its instances.
    auto plan = solve_vertical_or_hybrid(spec_, std::max(lambda, kMinRate), counts);
    if (!plan) {
      PipelinePlan maxed;
      for (std::size_t s = 0; s < live.size(); ++s) {
        maxed.stages.push_back({live[s].batch, spec_.stages[s].c_max, counts[s]});
      }
      plan = maxed;
    }
    return plan_h2v_scaleup(live, *plan, now_ms);
  }

  void apply(const std::vector<ScalingAction>& actions) {
    std::vector<int> spawned;
    DeferredGroup group;
    for (const auto& a : actions) {
      if (a.await_spawns) {
        group.actions.push_back(a);
        continue;
      }
      const auto s = static_cast<std::size_t>(a.stage);
      switch (a.kind) {
        case ScalingAction::Kind::SetCores: {
          auto& inst = instances_.at(static_cast<std::size_t>(a.instance));
          if (!inst.alive || inst.retiring || inst.stage != a.stage) break;
          inst.committed_cores = a.value;
          ++inst.resize_token;
          if (inst.ready_ms > now_) {
            set_cores_now(inst, a.value);
          } else {
            push(now_ + static_cast<double>(sc_.timing.inplace_delay_ms), EventKind::CoresEffective,
                 inst.id, inst.resize_token);
          }
          break;
        }
        case ScalingAction::Kind::SetBatch:
          stages_[s].batch = a.value;
          update_flush(s, plan_rate_);
          try_dispatch(s);
          break;
        case ScalingAction::Kind::SpawnInstances:
          for (int k = 0; k < a.value; ++k) {
            const double ready = now_ + static_cast<double>(sc_.timing.cold_start_ms);
            const int id = create_instance(a.stage, a.cores, ready);
            spawned.push_back(id);
            push(ready, EventKind::SpawnReady, id);
          }
          break;
        case ScalingAction::Kind::RetireInstances:
          retire(s, a.value);
          break;
      }
    }
    if (!group.actions.empty()) {
      for (const auto& inst : instances_) {
        if (inst.alive && inst.ready_ms > now_ &&
            std::find(spawned.begin(), spawned.end(), inst.id) == spawned.end()) {
          spawned.push_back(inst.id);
        }
      }
      if (spawned.empty()) {
        for (auto& a : group.actions) a.await_spawns = false;
        apply(group.actions);
      } else {
        group.waiting = std::move(spawned);
        deferred_.push_back(std::move(group));
      }
    }
  }

  // Booting instances go first, then idle ones, then busy ones (which drain
  // their batch before leaving); newest first within each class.
  void retire(std::size_t s, int count) {
    auto members = stages_[s].members;
    auto rank = [&](int id) {
      const auto& inst = instances_[static_cast<std::size_t>(id)];
      if (inst.ready_ms > now_) return 0;
      return inst.busy ? 2 : 1;
    };
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      return rank(a) != rank(b) ? rank(a) < rank(b) : a > b;
    });
    for (int id : members) {
      if (count == 0) break;
      auto& inst = instances_[static_cast<std::size_t>(id)];
      if (!inst.alive || inst.retiring) continue;
      --count;
      if (inst.busy) {
        inst.retiring = true;
      } else {
        remove_instance(inst);
      }
    }
  }

  // ---- report ------------------------------------------------------------

  SimReport assemble() {
    now_ = std::max(now_, horizon_ms_);
    advance_cost();
    double ledger_ms = 0.0;
    for (auto& inst : instances_) {
      if (inst.alive) settle_ledger(inst);
      ledger_ms += inst.ledger_core_ms;
    }

    SimReport report;
    const std::size_t seconds = sc_.trace.rps.size();
    report.seconds.resize(seconds);
    std::vector<std::vector<double>> served_latency(seconds);
    std::vector<double> all_latency;
    for (const auto& r : requests_) {
      const auto sec = std::min(seconds - 1, static_cast<std::size_t>(r.arrival_ms / 1000.0));
      auto& row = report.seconds[sec];
      ++row.rps;
      ++report.total_arrivals;
      switch (r.status) {
        case Status::Served: {
          const double e2e = r.done_ms - r.arrival_ms;
          ++report.served;
          served_latency[sec].push_back(e2e);
          all_latency.push_back(e2e);
          report.max_served_latency_ms = std::max(report.max_served_latency_ms, e2e);
          if (e2e > spec_.slo_ms) {
            ++report.late_served;
            ++row.violations;
          }
          break;
        }
        case Status::Dropped:
          ++report.dropped;
          ++row.drops;
          ++row.violations;
          break;
        case Status::InFlight:
          ++report.in_flight_at_end;
          break;
      }
    }
    for (std::size_t t = 0; t < seconds; ++t) {
      auto& row = report.seconds[t];
      row.second = static_cast<long>(t);
      row.p99_ms = p99(served_latency[t]);
      row.cost_cores = cost_seconds_[t];
      report.total_core_seconds += cost_seconds_[t];
    }
    report.instance_core_seconds = ledger_ms / 1000.0;
    report.p99_ms = p99(all_latency);
    report.violation_rate =
        report.total_arrivals == 0
            ? 0.0
            : static_cast<double>(report.violations()) / static_cast<double>(report.total_arrivals);
    report.control = std::move(control_);
    report.actions = std::move(action_log_);
    report.max_concurrent_batches = batches_started_ == 0 ? 0 : (concurrent_violations_ > 0 ? 2 : 1);
    report.early_dispatches = early_dispatches_;
    report.max_batch_latency_ms = max_batch_latency_ms_;
    return report;
  }

  const Scenario& sc_;
  const PipelineSpec& spec_;
  const double horizon_ms_;
  WindowedMaxPredictor predictor_;
  ControllerState controller_;

  std::vector<StageRuntime> stages_;
  std::vector<Instance> instances_;
  std::vector<Request> requests_;
  std::priority_queue<Event, std::vector<Event>, LaterFirst> events_;
  std::vector<DeferredGroup> deferred_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;

  int allocated_cores_ = 0;
  double cost_mark_ms_ = 0.0;
  std::vector<double> cost_seconds_;

  std::size_t tick_cursor_ = 0;
  long tick_index_ = 0;
  double plan_rate_ = 1.0;
  std::vector<ControlRecord> control_;
  std::vector<ScalingAction> action_log_;

  int concurrent_violations_ = 0;
  long batches_started_ = 0;
  long early_dispatches_ = 0;
  double max_batch_latency_ms_ = 0.0;
};

void check_plan(const PipelineSpec& spec, const PipelinePlan& plan, const char* what) {
  if (plan.stages.size() != spec.stages.size()) {
    throw ConfigError(std::string(what) + " must have one entry per stage");
  }
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& cfg = plan.stages[s];
    const auto& p = spec.stages[s];
    if (cfg.batch < 1 || cfg.batch > p.b_max || cfg.cores < 1 || cfg.cores > p.c_max ||
        cfg.instances < 0 || plan.total_instances(s) < 1) {
      throw ConfigError(std::string(what) + " stage " + std::to_string(s) +
                        " is outside the profile limits");
    }
  }
}

}  // namespace

const char* to_string(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::Joint:
      return "joint";
    case PolicyKind::HorizontalOnly:
      return "horizontal";
    case PolicyKind::VerticalOnly:
      return "vertical";
    case PolicyKind::Static:
      return "static";
  }
  return "unknown";
}

const char* to_string(BaselineRate rate) {
  return rate == BaselineRate::Forecast ? "forecast" : "current";
}

const char* to_string(DropPolicy policy) {
  switch (policy) {
    case DropPolicy::AtSlo:
      return "slo";
    case DropPolicy::At3xSlo:
      return "3xslo";
    case DropPolicy::Never:
      return "never";
  }
  return "unknown";
}

void Scenario::validate() const {
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (trace.rps.empty()) throw ConfigError("workload trace is empty");
  for (int r : trace.rps) {
    if (r < 0) throw ConfigError("workload trace has a negative rate");
  }
  if (timing.cold_start_ms <= 0 || timing.inplace_delay_ms <= 0 || timing.control_period_ms <= 0 ||
      timing.drain_limit_ms <= 0 || timing.flush_slack_ms < 0.0) {
    throw ConfigError("timing knobs must be positive");
  }
  if (horizon_s < 1) throw ConfigError("predictor horizon must be >= 1 s");
  if (predictor.window == 0 || predictor.lookback == 0 || !(predictor.headroom > 0.0)) {
    throw ConfigError("predictor window, lookback and headroom must be positive");
  }
  if (policy == PolicyKind::Static && !initial_plan) {
    throw ConfigError("static policy needs a plan");
  }
  if (initial_plan) {
    if (initial_plan->extra_instances.size() != initial_plan->stages.size() &&
        !initial_plan->extra_instances.empty()) {
      throw ConfigError("plan extra_instances must match its stages");
    }
    check_plan(spec, *initial_plan, "plan");
  }
}

bool should_drop(double arrival_ms, double now_ms, DropPolicy policy, int slo_ms) {
  const double age = now_ms - arrival_ms;
  switch (policy) {
    case DropPolicy::AtSlo:
      return age >= slo_ms;
    case DropPolicy::At3xSlo:
      return age >= 3.0 * slo_ms;
    case DropPolicy::Never:
      return false;
  }
  return false;
}

std::optional<std::size_t> batch_dispatch_rule(std::span<const double> enqueue_ms, int batch,
                                               double now_ms, double flush_after_ms) {
  if (batch < 1) throw InvalidArgument("batch must be >= 1");
  if (enqueue_ms.empty()) return std::nullopt;
  return dispatch_count(enqueue_ms.size(), enqueue_ms.front(), batch, now_ms, flush_after_ms);
}

SimReport run(const Scenario& scenario) {
  scenario.validate();
  Engine engine(scenario);
  return engine.run();
}

}  // namespace hvscale
