#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfpa/problem.hpp"
#include "cfpa/smoothing.hpp"

namespace cfpa {

struct SolverOptions {
  double lambda0 = 0.1;
  double zeta = 3.0;
  double mu_s = 1e-7;    // smoothing knee, sqrt(W)
  double tau = 1e-4;     // Armijo sufficient-decrease constant
  double epsilon = 1e-3; // relative-decrease exit of the inner loop
  double eps_feas = 1e-5;
  int max_penalty_iters = 40;
  int max_apg_iters = 5000;
  double alpha_init = 1.0;
  double backtrack_factor = 0.5;
  int max_backtracks = 60;
  PowerModel model = PowerModel::NonLinear;
  double power_weight = 1.0;  // 0 turns the solve into a pure feasibility search
  std::uint64_t init_seed = 1;
  double init_scale = 1e-10;  // x0 ~ U[0, init_scale]
  bool record_history = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const SolverOptions& o);
void from_json(const nlohmann::json& j, SolverOptions& o);

/// Full gradient of the penalized cost (smoothed power part plus penalties).
Eigen::VectorXd gradient(const Eigen::VectorXd& x, double lambda, const ProblemData& data,
                         const SolverOptions& options);

/// Per-AP projection onto {x >= 0, ||x_l|| <= sqrt(p_max)}.
Eigen::VectorXd project(const Eigen::VectorXd& x, const ProblemData& data);

struct ArmijoResult {
  double alpha = 0.0;
  Eigen::VectorXd candidate;
  double candidate_value = 0.0;
  int backtracks = 0;
  bool stalled = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Projection = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Backtracks from `alpha_start` until
///   f(y) - f(P(y - a g)) >= tau * a * ||g||^2.
/// On exhaustion returns the smallest-step candidate with `stalled` set.
ArmijoResult armijo_step(const Eigen::VectorXd& y, double f_y, const Eigen::VectorXd& grad,
                         const Objective& f, const Projection& proj, double alpha_start,
                         const SolverOptions& options);

/// APG momentum recursion: 0.5 * sqrt(4 m^2 + 1) + 0.5.
inline double next_momentum(double m) { return 0.5 * std::sqrt(4.0 * m * m + 1.0) + 0.5; }

struct ApgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int stalls = 0;
  bool cap_hit = false;
  std::vector<double> history;  // accepted objective after each iteration
};

/// Monotone accelerated projected gradient on the penalized cost at a fixed
/// penalty weight. x0 is projected on entry.
ApgResult apg_minimize(const ProblemData& data, double lambda, const Eigen::VectorXd& x0,
                       const SolverOptions& options);

struct PenaltyIteration {
  int index = 0;  // 0-based
  double lambda = 0.0;
  int apg_iters = 0;
  double f_value = 0.0;
  double max_violation = 0.0;  // max_k max(g_k, 0)
  int stalls = 0;
  bool apg_cap_hit = false;
  std::vector<double> history;
};

struct SolverResult {
  Eigen::VectorXd x;
  bool feasible = false;
  std::vector<bool> user_feasible;
  Eigen::VectorXd margins;  // g_k(x)
  Eigen::VectorXd per_ap_tx;
  Eigen::VectorXd per_ap_consumed_ideal;
  Eigen::VectorXd per_ap_consumed_nonlinear;
  double consumed_ideal = 0.0;
  double consumed_nonlinear = 0.0;
  std::vector<PenaltyIteration> trace;
  double wall_time_s = 0.0;
  int penalty_iters = 0;
  int apg_iters_total = 0;
  PowerModel model = PowerModel::NonLinear;
};

/// max(g_k, 0) <= eps * sqrt(x^T C_k x + sigma^2) for every user.
std::vector<bool> users_meeting_targets(const Eigen::VectorXd& x, const ProblemData& data,
                                        double eps);

/// Penalty loop: escalates lambda by zeta, warm-starting each inner solve.
SolverResult penalty_minimize(const ProblemData& data, const SolverOptions& options);

nlohmann::json result_to_json(const SolverResult& result);
/// `penalty_iter, lambda, apg_iters, f_value, max_violation`
std::string trace_to_csv(const SolverResult& result);

}  // namespace cfpa
