#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rootsgd/harness.hpp"
#include "rootsgd/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

void print_violations(const std::vector<rootsgd::ConfigViolation>& violations) {
  for (const auto& v : violations) std::cerr << "  " << v.field << ": " << v.message << "\n";
}

// Loads and parses a config; returns false (after printing) on violations.
bool load_config(const std::string& path, rootsgd::ExperimentConfig& cfg) {
  const rootsgd::ConfigMap map = rootsgd::ConfigMap::load(path);
  std::vector<rootsgd::ConfigViolation> violations;
  cfg = rootsgd::parse_experiment_config(map, violations);
  if (!violations.empty()) {
    std::cerr << path << ": invalid config\n";
    print_violations(violations);
    return false;
  }
  return true;
}

int cmd_validate(const std::string& path) {
  rootsgd::ExperimentConfig cfg;
  if (!load_config(path, cfg)) return kInvalid;
  rootsgd::ResolvedPlan plan;
  const auto violations = rootsgd::validate_config(cfg, &plan);
  if (!violations.empty()) {
    std::cerr << path << ": invalid config\n";
    print_violations(violations);
    return kInvalid;
  }
  std::cout << "ok: eta = " << rootsgd::format_number(plan.eta)
            << ", burn_in = " << plan.step_plan.burn_in << ", T = " << plan.horizon
            << ", probes = " << plan.probes.size()
            << (plan.out_of_theory ? ", out of theory" : "") << "\n";
  return kOk;
}

int cmd_run(const std::string& path) {
  rootsgd::ExperimentConfig cfg;
  if (!load_config(path, cfg)) return kInvalid;
  rootsgd::RunOptions options;
  options.workers = rootsgd::default_worker_count();
  try {
    const rootsgd::ExperimentResult result = rootsgd::run_experiment(cfg, options);
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
  } catch (const rootsgd::ConfigError& e) {
    std::cerr << path << ": invalid config\n";
    print_violations(e.violations());
    return kInvalid;
  }
  return kOk;
}

int cmd_report(const std::string& dir) {
  std::cout << rootsgd::report_results(dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ROOT-SGD experiment runner"};
  app.require_subcommand(1);

  std::string run_path;
  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV results");
  run->add_option("config", run_path, "Config file")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and print its resolved plan");
  validate->add_option("config", validate_path, "Config file")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Aggregate results under a directory");
  report->add_option("results_dir", report_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(run_path);
    if (*validate) return cmd_validate(validate_path);
    if (*report) return cmd_report(report_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
