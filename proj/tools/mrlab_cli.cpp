#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mrlab/lab.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int run(const std::string& path, const mrlab::lab::RunOptions& options) {
  using namespace mrlab::lab;
  const Scenario scenario = load_scenario(path);
  const Report report = run_scenario(scenario, options);
  const std::string dir = options.out_dir.value_or(scenario.out_dir);
  write_outputs(report, dir);

  for (const CheckResult& r : report.results) {
    std::printf("%-24s %-13s", r.name.c_str(), to_string(r.status).c_str());
    if (options.timings) std::printf(" %10.1f ms", r.wall_ms);
    if (!r.message.empty()) std::printf("  %s", r.message.c_str());
    std::printf("\n");
  }
  std::printf("report: %s/report.json (exit %d)\n", dir.c_str(), report.exit_code);
  return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-autonomous maximal regularity laboratory"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 1;
  bool no_timings = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario file and write report.json plus CSV tables");
  run_cmd->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory (overrides out_dir)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Seed (overrides the scenario seed)");
  run_cmd->add_option("--workers", workers, "Concurrent scenario points")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--no-timings", no_timings, "Zero all wall times so reports are byte-identical");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  mrlab::lab::RunOptions options;
  if (*out_opt) options.out_dir = out_dir;
  if (*seed_opt) options.seed = seed;
  options.workers = workers;
  options.timings = !no_timings;

  try {
    return run(scenario_path, options);
  } catch (const mrlab::lab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
