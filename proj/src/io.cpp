#include "hvscale/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hvscale/error.hpp"

namespace hvscale::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

long parse_integer(const std::string& text, std::size_t line, const char* what) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string("expected an integer ") + what + ", got '" + text + "'", line);
  }
  if (used != text.size()) {
    throw ParseError(std::string("expected an integer ") + what + ", got '" + text + "'", line);
  }
  return value;
}

double parse_real(const std::string& text, std::size_t line, const char* what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string("expected a number ") + what + ", got '" + text + "'", line);
  }
  if (used != text.size() || !std::isfinite(value)) {
    throw ParseError(std::string("expected a number ") + what + ", got '" + text + "'", line);
  }
  return value;
}

// Reads the header and hands each nonblank data row to `row`. An optional
// header may be left out, in which case the first row is data.
template <typename RowFn>
void read_csv(std::istream& in, const std::string& expected_header, bool header_optional,
              RowFn&& row) {
  std::string line;
  std::size_t number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      std::string compact;
      for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
      }
      header_seen = true;
      if (compact == expected_header) continue;
      if (!header_optional) throw ParseError("expected header '" + expected_header + "'", number);
    }
    row(split_csv(line), number);
  }
  if (!header_seen && !header_optional) {
    throw ParseError("missing header '" + expected_header + "'", number);
  }
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename T>
T field(const json& obj, const char* key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T required(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string("missing required field '") + key + "'");
  }
  return field<T>(obj, key, T{});
}

json read_json(const fs::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

WorkloadTrace parse_trace(std::istream& in, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("trace scale must be positive");
  WorkloadTrace trace;
  read_csv(in, "second,rps", true, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 2) throw ParseError("expected 2 fields", line);
    const long second = parse_integer(f[0], line, "second");
    const long rps = parse_integer(f[1], line, "rps");
    const auto expected = static_cast<long>(trace.rps.size());
    if (second > expected) throw GapError(expected);
    if (second < expected) throw ParseError("second " + f[0] + " repeats or goes backwards", line);
    if (rps < 0) throw ParseError("rps must be nonnegative", line);
    trace.rps.push_back(static_cast<int>(std::lround(static_cast<double>(rps) * scale)));
  });
  if (trace.rps.empty()) throw ParseError("trace has no rows");
  return trace;
}

WorkloadTrace load_trace(const fs::path& path, double scale) {
  auto in = open_input(path);
  return parse_trace(in, scale);
}

void write_trace(const WorkloadTrace& trace, const fs::path& path) {
  std::string text = "second,rps\n";
  for (std::size_t t = 0; t < trace.rps.size(); ++t) {
    text += std::to_string(t) + "," + std::to_string(trace.rps[t]) + "\n";
  }
  write_text(path, text);
}

std::vector<ProfileSample> parse_profile_samples(std::istream& in) {
  std::vector<ProfileSample> samples;
  read_csv(in, "batch,cores,latency_ms", false, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 3) throw ParseError("expected 3 fields", line);
    ProfileSample s;
    s.batch = static_cast<int>(parse_integer(f[0], line, "batch"));
    s.cores = static_cast<int>(parse_integer(f[1], line, "cores"));
    s.latency_ms = parse_real(f[2], line, "latency_ms");
    if (s.batch < 1 || s.cores < 1 || !(s.latency_ms > 0.0)) {
      throw ParseError("need batch >= 1, cores >= 1, latency_ms > 0", line);
    }
    samples.push_back(s);
  });
  return samples;
}

std::vector<ProfileSample> load_profile_samples(const fs::path& path) {
  auto in = open_input(path);
  return parse_profile_samples(in);
}

PipelineSpec parse_pipeline_spec(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ParseError("pipeline spec must be a JSON object");
  PipelineSpec spec;
  spec.name = field<std::string>(doc, "name", "pipeline");
  spec.slo_ms = required<int>(doc, "slo_ms");
  if (spec.slo_ms <= 0) throw ParseError("slo_ms must be positive");
  const auto& stages = doc.contains("stages") ? doc.at("stages") : json();
  if (!stages.is_array() || stages.empty()) throw ParseError("'stages' must be a nonempty array");

  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    if (!st.is_object()) throw ParseError("stage " + std::to_string(i) + " must be an object");
    const auto name = field<std::string>(st, "name", "stage" + std::to_string(i));
    const int b_max = field<int>(st, "b_max", 16);
    const int c_max = field<int>(st, "c_max", 16);
    ModelProfile profile;
    if (st.contains("profile_csv")) {
      const auto samples = load_profile_samples(resolve(base_dir, required<std::string>(st, "profile_csv")));
      profile = fit_profile(samples, b_max, c_max, name);
    } else {
      profile = {name,
                 required<double>(st, "gamma"),
                 required<double>(st, "epsilon"),
                 required<double>(st, "delta"),
                 required<double>(st, "eta"),
                 b_max,
                 c_max};
    }
    try {
      profile.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
    spec.stages.push_back(std::move(profile));
  }
  const double floor = spec.min_unloaded_latency_ms();
  if (spec.slo_ms < floor) {
    throw ParseError("slo_ms " + std::to_string(spec.slo_ms) +
                     " is below the unloaded pipeline latency " + std::to_string(floor));
  }
  return spec;
}

PipelineSpec load_pipeline_spec(const fs::path& path) {
  return parse_pipeline_spec(read_json(path), path.parent_path());
}

json to_json(const ModelProfile& p) {
  return {{"name", p.name}, {"gamma", p.gamma}, {"epsilon", p.epsilon}, {"delta", p.delta},
          {"eta", p.eta},   {"b_max", p.b_max}, {"c_max", p.c_max}};
}

json to_json(const PipelineSpec& spec) {
  json stages = json::array();
  for (const auto& s : spec.stages) stages.push_back(to_json(s));
  return {{"name", spec.name}, {"slo_ms", spec.slo_ms}, {"stages", stages}};
}

json to_json(const PipelinePlan& plan) {
  json stages = json::array();
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& cfg = plan.stages[s];
    json entry = {{"batch", cfg.batch}, {"cores", cfg.cores}, {"instances", cfg.instances}};
    if (plan.kind == PlanKind::Hybrid) entry["extra_instances"] = plan.extra_instances.at(s);
    stages.push_back(entry);
  }
  json out = {{"kind", to_string(plan.kind)},
              {"lambda_rps", plan.lambda_rps},
              {"total_cores", plan.total_cores},
              {"predicted_e2e_ms", plan.predicted_e2e_ms},
              {"budget_ms", plan.budget_ms},
              {"stages", stages}};
  if (plan.kind == PlanKind::Hybrid) out["lambda_vertical_rps"] = plan.lambda_vertical_rps;
  return out;
}

std::string report_csv(const SimReport& report) {
  std::string text = "second,rps,violations,drops,p99_ms,cost_cores\n";
  for (const auto& row : report.seconds) {
    text += std::to_string(row.second) + "," + std::to_string(row.rps) + "," +
            std::to_string(row.violations) + "," + std::to_string(row.drops) + "," +
            fixed3(row.p99_ms) + "," + fixed3(row.cost_cores) + "\n";
  }
  return text;
}

json report_json(const SimReport& report) {
  long transitions = 0;
  for (std::size_t i = 1; i < report.control.size(); ++i) {
    if (report.control[i].mode != report.control[i - 1].mode) ++transitions;
  }
  return {{"aggregates",
           {{"total_arrivals", report.total_arrivals},
            {"served", report.served},
            {"dropped", report.dropped},
            {"late_served", report.late_served},
            {"in_flight_at_end", report.in_flight_at_end},
            {"violation_rate", report.violation_rate},
            {"total_core_seconds", report.total_core_seconds},
            {"p99_ms", report.p99_ms},
            {"scaling_actions", report.actions.size()},
            {"mode_transitions", transitions}}}};
}

void write_report(const SimReport& report, const fs::path& path, ReportFormat format) {
  write_text(path, format == ReportFormat::Csv ? report_csv(report) : report_json(report).dump(2) + "\n");
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "joint") return PolicyKind::Joint;
  if (name == "horizontal") return PolicyKind::HorizontalOnly;
  if (name == "vertical") return PolicyKind::VerticalOnly;
  if (name == "static") return PolicyKind::Static;
  throw ParseError("unknown policy '" + name + "' (joint|horizontal|vertical|static)");
}

DropPolicy parse_drop_policy(const std::string& name) {
  if (name == "slo") return DropPolicy::AtSlo;
  if (name == "3xslo") return DropPolicy::At3xSlo;
  if (name == "never") return DropPolicy::Never;
  throw ParseError("unknown drop policy '" + name + "' (slo|3xslo|never)");
}

BaselineRate parse_baseline_rate(const std::string& name) {
  if (name == "forecast") return BaselineRate::Forecast;
  if (name == "current") return BaselineRate::Current;
  throw ParseError("unknown baseline rate '" + name + "' (forecast|current)");
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ParseError("run config must be a JSON object");
  RunConfig cfg;
  cfg.pipeline = resolve(base_dir, required<std::string>(doc, "pipeline"));
  cfg.trace = resolve(base_dir, required<std::string>(doc, "trace"));
  cfg.trace_scale = field<double>(doc, "trace_scale", 1.0);
  cfg.policy = parse_policy(field<std::string>(doc, "policy", "joint"));
  cfg.drop_policy = parse_drop_policy(field<std::string>(doc, "drop_policy", "slo"));
  cfg.baseline_rate = parse_baseline_rate(field<std::string>(doc, "baseline_rate", "forecast"));
  cfg.backlog_drain = field<bool>(doc, "backlog_drain", true);
  if (doc.contains("timing")) {
    const auto& t = doc.at("timing");
    cfg.timing.cold_start_ms = field<std::int64_t>(t, "cold_start_ms", cfg.timing.cold_start_ms);
    cfg.timing.inplace_delay_ms = field<std::int64_t>(t, "inplace_delay_ms", cfg.timing.inplace_delay_ms);
    cfg.timing.control_period_ms =
        field<std::int64_t>(t, "control_period_ms", cfg.timing.control_period_ms);
    cfg.timing.flush_slack_ms = field<double>(t, "flush_slack_ms", cfg.timing.flush_slack_ms);
    cfg.timing.drain_limit_ms = field<std::int64_t>(t, "drain_limit_ms", cfg.timing.drain_limit_ms);
  }
  if (doc.contains("predictor")) {
    const auto& p = doc.at("predictor");
    cfg.predictor.window = field<std::size_t>(p, "window", cfg.predictor.window);
    cfg.predictor.lookback = field<std::size_t>(p, "lookback", cfg.predictor.lookback);
    cfg.predictor.headroom = field<double>(p, "headroom", cfg.predictor.headroom);
    cfg.horizon_s = field<int>(p, "horizon_s", cfg.horizon_s);
  }
  if (doc.contains("plan")) {
    std::vector<StagePlan> stages;
    for (const auto& st : doc.at("plan")) {
      stages.push_back({field<int>(st, "batch", 1), field<int>(st, "cores", 1), field<int>(st, "instances", 1)});
    }
    cfg.plan = std::move(stages);
  }
  if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, required<std::string>(doc, "output_dir"));
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_json(path), path.parent_path());
}

Scenario make_scenario(const RunConfig& config, std::uint64_t seed) {
  Scenario sc;
  sc.spec = load_pipeline_spec(config.pipeline);
  sc.trace = load_trace(config.trace, config.trace_scale);
  sc.policy = config.policy;
  sc.drop_policy = config.drop_policy;
  sc.seed = seed;
  sc.timing = config.timing;
  sc.predictor = config.predictor;
  sc.horizon_s = config.horizon_s;
  sc.baseline_rate = config.baseline_rate;
  sc.backlog_drain = config.backlog_drain;
  if (config.plan) {
    PipelinePlan plan;
    plan.kind = PlanKind::Horizontal;
    plan.stages = *config.plan;
    plan.extra_instances.assign(plan.stages.size(), 0);
    for (const auto& s : plan.stages) plan.total_cores += s.instances * s.cores;
    sc.initial_plan = std::move(plan);
  }
  sc.validate();
  return sc;
}

}  // namespace hvscale::io
