#pragma once

// Experiment harness behind the CLI. Each study has an in-memory form that
// tests call directly and a cmd_* wrapper that writes the CSV/JSON artifacts.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfpa/oracle.hpp"
#include "cfpa/problem.hpp"
#include "cfpa/scenario.hpp"
#include "cfpa/solver.hpp"
#include "cfpa/statistics.hpp"

namespace cfpa {

enum class ExperimentKind { Scenario, Solve, SweepRuntime, SweepSavings, Sparsity, MaxMin };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Solve;
  ScenarioConfig scenario;
  std::optional<std::string> scenario_file;
  std::optional<std::string> statistics_file;
  SolverOptions solver;
  std::vector<double> se_targets;  // solve; 1 or K values
  std::vector<int> l_values;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  double se_target = 1.0;     // common SE for sweep-runtime and sparsity
  double bisection_tol = 0.01;
  std::string output_dir = ".";

  /// Defaults for each study: runtime K = 15, L in {25, 50, 100};
  /// savings K = 8, L in {10, 25}; sparsity K = 5, L = 15, SE = 6 on a 200 m
  /// square; 20 seeds.
  static ExperimentSpec defaults(ExperimentKind kind);
  void validate() const;
};

/// Keys absent from `j` keep the values already in `spec`.
void merge_spec_json(const nlohmann::json& j, ExperimentSpec& spec);
/// Everything except output_dir, with sorted keys.
nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// 64-bit FNV-1a of the canonical spec JSON, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

PowerParams power_params(const ScenarioConfig& config);

/// Scenario for one sweep point: the spec's config with L and seed replaced.
ScenarioConfig point_config(const ExperimentSpec& spec, int num_aps, std::uint64_t seed);

// ---------------------------------------------------------------- runtime

struct RuntimeRow {
  int num_aps = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  int penalty_iters = 0;
  int apg_iters_total = 0;
  double objective_w = 0.0;
  bool feasible = false;
};

struct RuntimeStudy {
  std::vector<RuntimeRow> rows;
  std::vector<int> fit_l;            // L values that entered the fit
  std::vector<double> median_ms;     // per fit_l
  std::optional<double> slope;       // least squares of log median vs log L
};

RuntimeStudy sweep_runtime(const ExperimentSpec& spec);

/// Least-squares slope of log(y) against log(x). Needs two distinct x.
std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> v);

// ---------------------------------------------------------------- savings

struct SavingsRow {
  int num_aps = 0;
  std::uint64_t seed = 0;
  double fraction = 0.0;
  double se_mm = 0.0;
  double se_target = 0.0;
  double p_nl_of_ideal_opt = 0.0;
  double p_nl_of_nl_opt = 0.0;
  std::optional<double> saving;
  bool feasible_ideal = false;
  bool feasible_nl = false;
};

struct SavingsStudy {
  std::vector<SavingsRow> rows;
  std::vector<std::string> skipped;  // one reason per aborted (L, seed) group
};

SavingsStudy sweep_savings(const ExperimentSpec& spec);

// ---------------------------------------------------------------- sparsity

struct SparsityRow {
  std::uint64_t seed = 0;
  int ap_index = 0;
  double ptx_ideal_w = 0.0;
  double ptx_nl_w = 0.0;
};

struct SparsityCount {
  std::uint64_t seed = 0;
  int off_ideal = 0;
  int off_nl = 0;
};

struct SparsityStudy {
  std::vector<SparsityRow> rows;
  std::vector<SparsityCount> counts;
  std::vector<std::string> skipped;
};

/// APs with P_tx below this fraction of P_max count as off.
inline constexpr double kOffThreshold = 1e-6;

SparsityStudy sparsity_study(const ExperimentSpec& spec);

// ---------------------------------------------------------------- commands

/// Problem for cmd_solve/cmd_maxmin: statistics file, else scenario file,
/// else a freshly drawn scenario. `se_targets` in the spec override the file.
ProblemData load_problem(const ExperimentSpec& spec, bool require_targets);

// Each returns a process exit status. cmd_solve: 0 feasible, 2 infeasible,
// 1 error. The others: 0 on success, 1 on error.
int cmd_scenario(const ExperimentSpec& spec);
int cmd_solve(const ExperimentSpec& spec);
int cmd_sweep_runtime(const ExperimentSpec& spec);
int cmd_sweep_savings(const ExperimentSpec& spec);
int cmd_sparsity(const ExperimentSpec& spec);
int cmd_maxmin(const ExperimentSpec& spec);
int run_experiment(const ExperimentSpec& spec);

std::string runtime_csv(const RuntimeStudy& study, const std::string& hash);
std::string savings_csv(const SavingsStudy& study, double bisection_tol, const std::string& hash);
std::string sparsity_csv(const SparsityStudy& study, const std::string& hash);
std::string sparsity_counts_csv(const SparsityStudy& study, const std::string& hash);

}  // namespace cfpa
