#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cfpa/scenario.hpp"

namespace cfpa {

/// Per-link MMSE channel estimates. Both vectors are indexed `l * K + k`;
/// `h_hat[..]` is N x M, `error_covariance[..]` is N x N.
struct EstimationModel {
  int num_aps = 0;
  int num_users = 0;
  std::vector<Eigen::MatrixXcd> h_hat;
  std::vector<Eigen::MatrixXcd> error_covariance;

  const Eigen::MatrixXcd& estimate(int l, int k) const {
    return h_hat[static_cast<std::size_t>(l * num_users + k)];
  }
  const Eigen::MatrixXcd& error(int l, int k) const {
    return error_covariance[static_cast<std::size_t>(l * num_users + k)];
  }
};

/// Partial-MMSE precoders normalized to unit average power per link.
/// `active(l, k)` is false when AP l does not serve user k (or has nothing to
/// send it); such links carry an all-zero precoder.
struct PrecoderSet {
  int num_aps = 0;
  int num_users = 0;
  std::vector<Eigen::MatrixXcd> w;  // l * K + k, N x M
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> active;  // L x K
  std::vector<std::vector<int>> service_sets;

  const Eigen::MatrixXcd& link(int l, int k) const {
    return w[static_cast<std::size_t>(l * num_users + k)];
  }
};

/// The deterministic quantities the power allocation problem is built from.
///
/// Row k of `b` is b_k. `c[k * K + i]` is the real symmetric PSD L x L matrix
/// C_ki. Diagnostics are not part of the serialized contract except where
/// noted in `statistics_to_json`.
struct EffectiveStatistics {
  int num_users = 0;
  int num_aps = 0;
  double sigma_dl2 = 1.0;
  Eigen::MatrixXd b;               // K x L
  std::vector<Eigen::MatrixXd> c;  // K*K blocks, L x L

  int realizations = 0;
  Eigen::MatrixXd b_stderr;       // K x L, standard error of [b_k]_l
  Eigen::MatrixXd c_diag_stderr;  // K x L, standard error of [C_kk]_ll
  double max_imag_ratio = 0.0;    // max |Im| / (|Re| + eps) before discarding Im
  double negative_mass_fraction = 0.0;  // worst user, clamped mass / ||b_k||_1

  const Eigen::MatrixXd& block(int k, int i) const {
    return c[static_cast<std::size_t>(k * num_users + i)];
  }
  Eigen::MatrixXd& block(int k, int i) {
    return c[static_cast<std::size_t>(k * num_users + i)];
  }
};

/// Draws decorrelated pilot observations and applies the per-AP MMSE filter.
EstimationModel estimate_channels(const ChannelSet& channels, const Scenario& scenario,
                                  std::uint64_t seed);

/// Users with the largest gain to AP `l`, strongest first; ties go to the
/// lower user index.
std::vector<int> select_service_set(const Scenario& scenario, int l);

PrecoderSet pmmse_precoders(const EstimationModel& estimation, const Scenario& scenario);

/// Monte-Carlo means of h^H w products. Realizations are reduced in a canonical
/// order with a fixed chunked pairwise tree, so results do not depend on the
/// order realizations are supplied in.
EffectiveStatistics estimate_expectations(const ChannelSet& channels,
                                          const PrecoderSet& precoders,
                                          double sigma_dl2);

/// Full channel pipeline for a scenario: sample, estimate, precode, reduce.
EffectiveStatistics build_statistics(const Scenario& scenario);

nlohmann::json statistics_to_json(const EffectiveStatistics& stats);
EffectiveStatistics statistics_from_json(const nlohmann::json& j);

}  // namespace cfpa
