#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hvscale/optimizer.hpp"
#include "hvscale/perf_profile.hpp"
#include "hvscale/simulator.hpp"

namespace hvscale::io {

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "HVSCALE_OUTPUT_DIR";

// `second,rps` CSV with contiguous seconds from 0; the header line is
// optional. Each rate is multiplied by
// `scale` and rounded. Throws ParseError (with line) or GapError.
WorkloadTrace parse_trace(std::istream& in, double scale = 1.0);
WorkloadTrace load_trace(const std::filesystem::path& path, double scale = 1.0);
void write_trace(const WorkloadTrace& trace, const std::filesystem::path& path);

// `batch,cores,latency_ms` CSV.
std::vector<ProfileSample> parse_profile_samples(std::istream& in);
std::vector<ProfileSample> load_profile_samples(const std::filesystem::path& path);

// JSON pipeline description:
//
//   {"name": "video", "slo_ms": 780,
//    "stages": [{"name": "detector", "gamma": 10, "epsilon": 40, "delta": 2,
//                "eta": 5, "b_max": 16, "c_max": 16},
//               {"name": "classifier", "profile_csv": "classifier.csv"}]}
//
// Stages given as profile CSVs are fitted on load; relative paths resolve
// against `base_dir`. Throws ParseError on malformed or invalid specs
// (including an SLO below the unloaded pipeline latency); DegenerateSamples
// passes through from fitting.
PipelineSpec parse_pipeline_spec(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir = {});
PipelineSpec load_pipeline_spec(const std::filesystem::path& path);

nlohmann::json to_json(const ModelProfile& profile);
nlohmann::json to_json(const PipelinePlan& plan);
nlohmann::json to_json(const PipelineSpec& spec);

enum class ReportFormat { Csv, Json };

// Per-second CSV `second,rps,violations,drops,p99_ms,cost_cores`.
std::string report_csv(const SimReport& report);
// Aggregates object.
nlohmann::json report_json(const SimReport& report);
// Throws IoError when the file cannot be written.
void write_report(const SimReport& report, const std::filesystem::path& path, ReportFormat format);

// Simulation run description (JSON). The seed always comes from the caller.
//
//   {"pipeline": "video.json", "trace": "trace.csv", "trace_scale": 1.0,
//    "policy": "joint" | "horizontal" | "vertical" | "static",
//    "drop_policy": "slo" | "3xslo" | "never",
//    "baseline_rate": "forecast" | "current", "backlog_drain": true,
//    "timing": {"cold_start_ms": 5500, "inplace_delay_ms": 100,
//               "control_period_ms": 1000, "flush_slack_ms": 0,
//               "drain_limit_ms": 60000},
//    "predictor": {"window": 120, "lookback": 30, "headroom": 1.0,
//                  "horizon_s": 10},
//    "plan": [{"batch": 1, "cores": 1, "instances": 1}, ...],
//    "output_dir": "out"}
struct RunConfig {
  std::filesystem::path pipeline;
  std::filesystem::path trace;
  double trace_scale = 1.0;
  PolicyKind policy = PolicyKind::Joint;
  DropPolicy drop_policy = DropPolicy::AtSlo;
  TimingKnobs timing;
  WindowedMaxConfig predictor;
  int horizon_s = 10;
  BaselineRate baseline_rate = BaselineRate::Forecast;
  bool backlog_drain = true;
  std::optional<std::vector<StagePlan>> plan;
  std::optional<std::filesystem::path> output_dir;
};

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

PolicyKind parse_policy(const std::string& name);
DropPolicy parse_drop_policy(const std::string& name);
BaselineRate parse_baseline_rate(const std::string& name);

// Loads the referenced files and builds a validated scenario.
Scenario make_scenario(const RunConfig& config, std::uint64_t seed);

}  // namespace hvscale::io
