#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hvscale/error.hpp"
#include "hvscale/io.hpp"
#include "hvscale/optimizer.hpp"
#include "hvscale/perf_profile.hpp"
#include "hvscale/simulator.hpp"

namespace fs = std::filesystem;
using namespace hvscale;

namespace {

fs::path output_dir(const std::optional<std::string>& flag, const io::RunConfig& config) {
  if (flag) return *flag;
  if (config.output_dir) return *config.output_dir;
  if (const char* env = std::getenv(io::kOutputDirEnv); env && *env) return env;
  return ".";
}

void print_summary(const std::string& label, const SimReport& r) {
  std::printf("%-12s arrivals=%ld served=%ld dropped=%ld late=%ld violation_rate=%.4f "
              "core_seconds=%.1f p99_ms=%.1f\n",
              label.c_str(), r.total_arrivals, r.served, r.dropped, r.late_served,
              r.violation_rate, r.total_core_seconds, r.p99_ms);
}

int cmd_fit(const std::string& csv, int b_max, int c_max, const std::string& name) {
  const auto samples = io::load_profile_samples(csv);
  const auto profile = fit_profile(samples, b_max, c_max, name);
  auto out = io::to_json(profile);
  out["rss"] = residual_sum_of_squares(profile, samples);
  out["samples"] = samples.size();
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_optimize(const std::string& spec_path, double lambda, const std::string& mode,
                 const std::vector<int>& instances) {
  const auto spec = io::load_pipeline_spec(spec_path);
  if (!instances.empty() && instances.size() != spec.stages.size()) {
    throw InvalidArgument("--instances needs one count per stage");
  }
  std::optional<PipelinePlan> plan;
  if (mode == "vertical") {
    plan = solve_vertical(spec, lambda, instances);
  } else if (mode == "horizontal") {
    plan = solve_horizontal(spec, lambda);
  } else {
    plan = solve_vertical_or_hybrid(spec, lambda, instances);
  }
  if (!plan) {
    std::cerr << "infeasible: no " << mode << " plan serves " << lambda << " rps within "
              << spec.slo_ms << " ms\n";
    return 2;
  }
  std::cout << io::to_json(*plan).dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 const std::optional<std::string>& out_flag, const std::optional<std::string>& policy) {
  auto config = io::load_run_config(config_path);
  if (policy) config.policy = io::parse_policy(*policy);
  const auto scenario = io::make_scenario(config, seed);
  const auto report = run(scenario);
  const auto dir = output_dir(out_flag, config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string stem = std::string(to_string(scenario.policy)) + "_seed" + std::to_string(seed);
  io::write_report(report, dir / (stem + ".csv"), io::ReportFormat::Csv);
  io::write_report(report, dir / (stem + ".json"), io::ReportFormat::Json);
  print_summary(to_string(scenario.policy), report);
  std::printf("wrote %s\n", (dir / (stem + ".{csv,json}")).string().c_str());
  return 0;
}

int cmd_compare(const std::string& config_path, std::uint64_t seed) {
  const auto config = io::load_run_config(config_path);
  const auto base = io::make_scenario(config, seed);
  const PolicyKind policies[] = {PolicyKind::Joint, PolicyKind::HorizontalOnly,
                                 PolicyKind::VerticalOnly};
  std::vector<std::future<SimReport>> runs;
  for (auto policy : policies) {
    auto sc = base;
    sc.policy = policy;
    sc.initial_plan.reset();
    runs.push_back(std::async(std::launch::async, [sc] { return run(sc); }));
  }
  std::printf("%-12s %10s %10s %10s %10s %12s %14s %10s\n", "policy", "arrivals", "served",
              "dropped", "late", "viol_rate", "core_seconds", "p99_ms");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto r = runs[i].get();
    std::printf("%-12s %10ld %10ld %10ld %10ld %11.3f%% %14.1f %10.1f\n", to_string(policies[i]),
                r.total_arrivals, r.served, r.dropped, r.late_served, 100.0 * r.violation_rate,
                r.total_core_seconds, r.p99_ms);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint horizontal/vertical autoscaling for inference pipelines"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit-profile", "Fit latency coefficients from profiling samples");
  std::string fit_csv, fit_name = "model";
  int b_max = 16, c_max = 16;
  fit->add_option("csv", fit_csv, "CSV with header batch,cores,latency_ms")->required();
  fit->add_option("--bmax", b_max, "Largest batch size")->check(CLI::Range(1, kMaxProfileLimit));
  fit->add_option("--cmax", c_max, "Largest core count")->check(CLI::Range(1, kMaxProfileLimit));
  fit->add_option("--name", fit_name, "Model name");

  auto* opt = app.add_subcommand("optimize", "Solve a scaling plan for one arrival rate");
  std::string opt_spec, mode = "vertical";
  double lambda = 0.0;
  std::vector<int> instances;
  opt->add_option("spec", opt_spec, "Pipeline spec (JSON)")->required();
  opt->add_option("--lambda", lambda, "Arrival rate in rps")->required()->check(CLI::PositiveNumber);
  opt->add_option("--mode", mode, "vertical|horizontal|hybrid")
      ->check(CLI::IsMember({"vertical", "horizontal", "hybrid"}));
  opt->add_option("--instances", instances, "Instances per stage (vertical/hybrid)");

  auto* sim = app.add_subcommand("simulate", "Replay a trace under one policy");
  std::string sim_config;
  std::uint64_t sim_seed = 0;
  std::optional<std::string> sim_out, sim_policy;
  sim->add_option("config", sim_config, "Run config (JSON)")->required();
  sim->add_option("--seed", sim_seed, "Arrival RNG seed")->required();
  sim->add_option("--out", sim_out, "Output directory (default: config, then $HVSCALE_OUTPUT_DIR, then .)");
  sim->add_option("--policy", sim_policy, "Override the config's policy");

  auto* cmp = app.add_subcommand("compare", "Run joint, horizontal and vertical side by side");
  std::string cmp_config;
  std::uint64_t cmp_seed = 0;
  cmp->add_option("config", cmp_config, "Run config (JSON)")->required();
  cmp->add_option("--seed", cmp_seed, "Arrival RNG seed")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(fit_csv, b_max, c_max, fit_name);
    if (*opt) return cmd_optimize(opt_spec, lambda, mode, instances);
    if (*sim) return cmd_simulate(sim_config, sim_seed, sim_out, sim_policy);
    if (*cmp) return cmd_compare(cmp_config, cmp_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
