#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rootsgd/analysis.hpp"
#include "rootsgd/errors.hpp"
#include "rootsgd/problem.hpp"
#include "rootsgd/root_sgd.hpp"

namespace rootsgd {

/// Flat `key = value` settings with dotted keys. `#` starts a comment.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text);
  static ConfigMap load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class MethodName { root_sgd, root_sgd_restart, sgd, prj_sgd };

const char* to_string(MethodName method);

/// A horizon or probe index: either an absolute count or a multiple of the
/// burn-in length ("16B").
struct IterationSpec {
  double value = 0.0;
  bool burn_in_multiple = false;

  std::size_t resolve(std::size_t burn_in) const;
  std::string text() const;
};

struct ProblemSpec {
  std::string name;
  std::size_t d = 0;
  Vector spectrum;
  double hessian_noise_scale = 0.0;
  Vector grad_noise_cov;  // d entries (diagonal) or d*d entries
  Vector design_cov;      // d entries (diagonal) or d*d entries
  double noise_std = 1.0;
  Vector theta_star;
  Vector theta_gen;
  double ridge = 0.0;
  bool rotate = false;
  std::size_t estimation_samples = 1'000'000;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  ProblemSpec problem;
  MethodName method = MethodName::root_sgd;
  Setting setting = Setting::lsn;
  std::optional<double> eta;  // empty means "max"
  std::optional<std::size_t> burn_in;
  std::optional<double> eta_alpha;  // baselines: eta_t = eta t^-alpha
  std::size_t prj_discard = 0;
  std::optional<IterationSpec> horizon;
  std::optional<double> epsilon;
  std::vector<IterationSpec> probes;
  std::size_t replicates = 1;
  std::uint64_t master_seed = 0;
  Vector theta0;  // empty means the origin
  bool strict = true;
  bool covariance = false;
  std::filesystem::path output_path;
};

struct ConfigViolation {
  std::string field;
  std::string message;
};

/// Parses a ConfigMap into an ExperimentConfig. Malformed or unknown fields
/// are reported as violations rather than thrown.
ExperimentConfig parse_experiment_config(const ConfigMap& map,
                                         std::vector<ConfigViolation>& violations);

std::shared_ptr<const Problem> build_problem(const ProblemSpec& spec);

/// Concrete run plan: step size, burn-in, horizon and probes.
struct ResolvedPlan {
  std::shared_ptr<const Problem> problem;
  double eta = 0.0;
  double eta_max = 0.0;  // NaN when the setting's constant is missing
  StepPlan step_plan;
  std::size_t horizon = 0;
  std::vector<std::size_t> probes;
  Vector theta0;
  double g0_sq = 0.0;
  std::optional<RestartSchedule> schedule;
  bool out_of_theory = false;
};

/// Resolves the config against its problem and lists every violation:
/// structural problems always, and in strict mode eta <= eta_max, T >= B and
/// (for covariance runs) the asymptotic step-size conditions.
std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg,
                                             ResolvedPlan* plan = nullptr,
                                             std::shared_ptr<const Problem> problem = nullptr);

struct ProbeSummary {
  std::size_t t = 0;
  double grad_norm_sq_mean = 0.0;
  double grad_norm_sq_se = 0.0;
  double dist_sq_mean = 0.0;
  double dist_sq_se = 0.0;
  double v_norm_sq_mean = 0.0;
  double v_norm_sq_se = 0.0;
  double z_norm_sq_mean = 0.0;
  double z_norm_sq_se = 0.0;
  /// Finite-sample bound (root_sgd) or loop target (restart); NaN otherwise.
  double reference = 0.0;
};

struct ExperimentResult {
  ResolvedPlan plan;
  std::vector<ProbeSummary> summary;
  /// sqrt(T)(theta_T - theta*) per replicate (averaged iterate for prj_sgd).
  std::vector<Vector> scaled_final_errors;
  std::optional<CovarianceReport> covariance;
  std::size_t samples_consumed = 0;
  std::vector<std::filesystem::path> files;
};

struct RunOptions {
  unsigned workers = 1;
  /// Reuse an already constructed problem (must match cfg.problem).
  std::shared_ptr<const Problem> problem;
};

/// Runs all replicates and writes replicates.csv, summary.csv, run.csv,
/// final.csv and (when requested) covariance.csv under cfg.output_path.
/// Throws ConfigError on violations.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigViolation> violations);
  const std::vector<ConfigViolation>& violations() const { return violations_; }

 private:
  std::vector<ConfigViolation> violations_;
};

/// Aggregates the summary.csv and run.csv files found under `results_dir`
/// (recursively) into one table.
std::string report_results(const std::filesystem::path& results_dir);

/// %.17g formatting used for every CSV number.
std::string format_number(double x);

}  // namespace rootsgd
