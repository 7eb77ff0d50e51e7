#pragma once

// Small-scale references the solver is checked against. None of these call
// into the APG machinery except max_min_sinr, whose feasibility probe reuses
// penalty_minimize with the power objective switched off.

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfpa/problem.hpp"
#include "cfpa/solver.hpp"

namespace cfpa {

struct OracleReport {
  Eigen::VectorXd x_best;
  double objective = 0.0;  // +inf when nothing feasible was found
  bool feasible = false;
  double resolution = 0.0;
  long long evaluations = 0;
};

/// Exact optimum for K = L = 1: rho^2 = gamma sigma^2 / (b^2 - gamma (c - b^2)).
OracleReport single_link_closed_form(const ProblemData& data, PowerModel model);

/// Largest dimension grid_search accepts.
inline constexpr int kGridSearchMaxDimension = 6;

/// Minimum consumed power over the lattice {0, r, 2r, ...}^{KL} restricted to
/// the per-AP caps and g_k <= 0. The scan is exact: it visits lattice points
/// in lexicographic order, prunes only subtrees whose partial objective
/// already exceeds the incumbent (the objective is nondecreasing in every
/// coordinate), and resolves the last coordinate by a search over its
/// feasible interval. Coarser nested lattices seed the incumbent. Ties go to
/// the lexicographically smallest point.
OracleReport grid_search(const ProblemData& data, double resolution, PowerModel model);

struct FeasibilityReport {
  std::vector<bool> user_ok;
  Eigen::VectorXd margins;  // g_k(x)
  Eigen::VectorXd scales;   // sqrt(x^T C_k x + sigma^2)
  std::vector<bool> ap_ok;
  bool all_ok = false;
};

/// g_k <= tol * sqrt(x^T C_k x + sigma^2) for each user and
/// ||x_l|| <= sqrt(p_max) * (1 + tol) for each AP.
FeasibilityReport check_feasibility(const Eigen::VectorXd& x, const ProblemData& data,
                                    double tol);

struct MaxMinReport {
  std::optional<double> gamma;  // largest common SINR verified feasible
  std::optional<double> se;
  double se_lower = 0.0;  // feasible end of the bracket
  double se_upper = 0.0;  // infeasible end of the bracket
  int probes = 0;
  bool conclusive = true;
  double bisection_tol = 0.01;
};

/// Bisection on a common SE target. The initial upper end is the noise-limited
/// bound with every AP at full power, min_k p_max (sum_l b_kl)^2 / sigma^2.
MaxMinReport max_min_sinr(const ProblemData& data, const SolverOptions& options,
                          double bisection_tol = 0.01);

nlohmann::json oracle_to_json(const OracleReport& r);

}  // namespace cfpa
