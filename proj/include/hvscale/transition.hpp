#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hvscale/optimizer.hpp"

namespace hvscale {

enum class ControllerMode { HorizontalSteady, VerticalBurst, HybridSpawning };

const char* to_string(ControllerMode mode);

// What the controller sees of one deployed instance.
struct InstanceView {
  int id = 0;
  int cores = 1;

  bool operator==(const InstanceView&) const = default;
};

struct StageView {
  int batch = 1;
  std::vector<InstanceView> ready;
  std::vector<InstanceView> booting;

  bool operator==(const StageView&) const = default;
};

// Live deployment, one entry per pipeline stage.
using LiveConfig = std::vector<StageView>;

struct ScalingAction {
  enum class Kind { SetCores, SetBatch, SpawnInstances, RetireInstances };

  Kind kind = Kind::SetBatch;
  int stage = 0;
  // SetCores: id of the instance to resize; unused otherwise.
  int instance = -1;
  // SetCores: cores. SetBatch: batch size. Spawn/Retire: instance count.
  int value = 0;
  // SpawnInstances: cores of each new instance.
  int cores = 0;
  std::int64_t issue_ms = 0;
  // Apply only once every SpawnInstances of the same plan is ready.
  bool await_spawns = false;

  static ScalingAction set_cores(int stage, int instance, int cores, std::int64_t issue_ms);
  static ScalingAction set_batch(int stage, int batch, std::int64_t issue_ms);
  static ScalingAction spawn(int stage, int count, int cores, std::int64_t issue_ms);
  static ScalingAction retire(int stage, int count, std::int64_t issue_ms);

  bool operator==(const ScalingAction&) const = default;
};

std::string describe(const ScalingAction& action);

struct PendingSpawn {
  int stage = 0;
  int count = 0;
  int cores = 1;
  std::int64_t ready_at_ms = 0;

  bool operator==(const PendingSpawn&) const = default;
};

struct ControllerState {
  ControllerMode mode = ControllerMode::HorizontalSteady;
  // Spawns requested but not yet ready. Nonempty only while HybridSpawning
  // or while a vertical-to-horizontal handover waits for its instances.
  std::vector<PendingSpawn> pending_spawns;
  // Second phase of an in-flight handover, released once its spawns are up.
  std::vector<ScalingAction> deferred;

  // A handover is in flight while its second phase waits, or while the
  // 1-core instances it spawned are still booting.
  bool handover_in_flight() const {
    return !deferred.empty() || (mode == ControllerMode::HorizontalSteady && !pending_spawns.empty());
  }

  bool operator==(const ControllerState&) const = default;
};

struct ControllerConfig {
  std::int64_t cold_start_ms = 5500;
};

struct StepResult {
  ControllerState state;
  std::vector<ScalingAction> actions;
};

// Horizontal plans for the current and the predicted rate coincide in every
// stage's (batch, instances). False if either rate cannot be served
// horizontally. Throws InvalidArgument for nonpositive rates.
bool is_stable(const PipelineSpec& spec, double lambda_now, double lambda_pred);

// Throughput of the ready instances of `stage` at its current batch size.
double live_capacity(const PipelineSpec& spec, const LiveConfig& live, std::size_t stage);

// Ready capacity covers `lambda` at every stage and the end-to-end latency
// charge (slowest ready instance per stage) fits the SLO.
bool live_config_serves(const PipelineSpec& spec, const LiveConfig& live, double lambda);

// One control tick. Policy, in order:
//   1. an in-flight handover releases its second phase once its spawns are up;
//   2. capacity short of max(now, predicted): vertical scale-up of the ready
//      instances if solve_vertical succeeds, otherwise the hybrid plan
//      (ready instances at c_max plus spawns sized by solve_hybrid);
//   3. after a burst, once the horizontal plans for the current and
//      predicted rate agree, hand over to the horizontal plan;
//   4. in horizontal steady state, a stable horizontal plan that needs no
//      new instances is applied (scale-in);
//   5. otherwise nothing.
StepResult step(const ControllerState& state, const PipelineSpec& spec, double lambda_now,
                double lambda_pred, const LiveConfig& live, std::int64_t now_ms,
                const ControllerConfig& config = {});

// Vertical-to-horizontal handover onto a 1-core target plan. Spawns come
// first; resizing existing instances to 1 core, batch changes and
// retirements follow with await_spawns set when anything was spawned or is
// still booting.
std::vector<ScalingAction> plan_v2h_transition(const LiveConfig& current,
                                               const PipelinePlan& target,
                                               std::int64_t issue_ms);

// Sets every instance of each stage (ready and booting) to the plan's cores
// and updates the batch alongside. Never resizes a subset of a stage.
std::vector<ScalingAction> plan_h2v_scaleup(const LiveConfig& current,
                                            const PipelinePlan& vertical_plan,
                                            std::int64_t issue_ms);

}  // namespace hvscale
