#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfpa/statistics.hpp"

namespace cfpa {

enum class PowerModel { Ideal, NonLinear };

std::string to_string(PowerModel model);
PowerModel parse_power_model(const std::string& name);

/// Per-AP amplifier parameters.
struct PowerParams {
  double p_max = 1.0;
  double eta_max = 0.7853981633974483;
  double eta = 0.7853981633974483;
};

/// Per-user quality targets, either as spectral efficiency (bits/s/Hz) or as
/// linear SINR. A single value applies to every user.
struct Targets {
  enum class Kind { SpectralEfficiency, Sinr };
  Kind kind = Kind::SpectralEfficiency;
  std::vector<double> values;

  static Targets se(std::vector<double> v) { return {Kind::SpectralEfficiency, std::move(v)}; }
  static Targets sinr(std::vector<double> v) { return {Kind::Sinr, std::move(v)}; }
};

/// Everything the solver touches.
///
/// The allocation vector x stacks per-user blocks: x[k * L + l] = rho_lk.
/// C_k is block diagonal with blocks C_k0 .. C_k(K-1); only the blocks are
/// stored. `b_tilde` holds the lifted vectors as columns (KL x K).
struct ProblemData {
  int num_users = 0;
  int num_aps = 0;
  Eigen::MatrixXd b;                    // K x L
  Eigen::MatrixXd b_tilde;              // KL x K
  std::vector<Eigen::MatrixXd> c;       // K*K blocks, L x L
  std::vector<Eigen::MatrixXd> c_sqrt;  // symmetric PSD roots of the blocks
  double sigma_dl = 1.0;                // sqrt of the (possibly normalized) noise power
  double noise_power = 1.0;             // physical sigma_DL^2 in watts
  Eigen::VectorXd gamma_bar;            // linear SINR targets, empty if none
  double p_max = 1.0;
  double eta_max = 0.7853981633974483;
  double eta = 0.7853981633974483;

  int dimension() const { return num_users * num_aps; }
  bool has_targets() const { return gamma_bar.size() == num_users; }
  const Eigen::MatrixXd& block(int k, int i) const {
    return c[static_cast<std::size_t>(k * num_users + i)];
  }
  const Eigen::MatrixXd& block_sqrt(int k, int i) const {
    return c_sqrt[static_cast<std::size_t>(k * num_users + i)];
  }
  /// sqrt((1 + gamma_bar_k) / gamma_bar_k)
  double target_factor(int k) const;
};

/// Builds ProblemData from statistics.
///
/// With `normalize_noise` the statistics are expressed relative to the
/// downlink noise floor (b / sigma, C / sigma^2, sigma = 1). SINR, feasibility
/// and the optimal allocation are unchanged; only the scale of g_k is, which
/// keeps the penalty weights in a well-conditioned range.
ProblemData assemble(const EffectiveStatistics& stats, const PowerParams& power,
                     const std::optional<Targets>& targets, bool normalize_noise = true);

/// Copy of `data` with every user's target set to `gamma`.
ProblemData with_common_target(const ProblemData& data, double gamma);

/// Converts bits/s/Hz to linear SINR: 2^se - 1.
double se_to_sinr(double se);
double sinr_to_se(double sinr);

Eigen::VectorXd gather_ap(const Eigen::VectorXd& x, int l, const ProblemData& data);
double transmit_power(const Eigen::VectorXd& x, int l, const ProblemData& data);
Eigen::VectorXd per_ap_transmit_power(const Eigen::VectorXd& x, const ProblemData& data);

struct ConsumedPower {
  Eigen::VectorXd per_ap;
  double total = 0.0;
};
ConsumedPower consumed_power(const Eigen::VectorXd& x, PowerModel model,
                             const ProblemData& data);

/// x^T C_k x evaluated block by block.
double quadratic_form(const Eigen::VectorXd& x, int k, const ProblemData& data);

Eigen::VectorXd sinr(const Eigen::VectorXd& x, const ProblemData& data);

/// g_k(x) = sqrt(x^T C_k x + sigma^2) - sqrt((1+gamma)/gamma) * b_tilde_k^T x.
double constraint_g(const Eigen::VectorXd& x, int k, const ProblemData& data);
Eigen::VectorXd constraint_values(const Eigen::VectorXd& x, const ProblemData& data);

/// Psi_k = max(g_k, 0)^2 for every user.
Eigen::VectorXd penalty_terms(const Eigen::VectorXd& x, const ProblemData& data);

/// Smoothed power objective plus lambda times the penalties. `power_weight`
/// scales the power part (0 gives a pure feasibility objective).
double penalized_cost(const Eigen::VectorXd& x, double lambda, PowerModel model,
                      const ProblemData& data, double mu_s, double power_weight = 1.0);

/// (P_nl(x_ideal) - P_nl(x_nl)) / P_nl(x_ideal) with the exact non-linear
/// model. Empty when the denominator is zero.
std::optional<double> relative_saving(const Eigen::VectorXd& x_ideal_opt,
                                      const Eigen::VectorXd& x_nl_opt,
                                      const ProblemData& data);

/// Statistics file plus an optional `se_targets` array and `power_model`
/// block ({p_max, eta_max, eta}).
ProblemData problem_from_json(const nlohmann::json& j, bool normalize_noise = true);
nlohmann::json problem_inputs_to_json(const EffectiveStatistics& stats,
                                      const PowerParams& power,
                                      const std::vector<double>& se_targets);

}  // namespace cfpa
