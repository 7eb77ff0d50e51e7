#pragma once

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace cfpa {

/// Deployment geometry, physical constants and Monte-Carlo depth.
///
/// Powers are in watts. Every default can be overridden; `validate()` throws
/// `std::invalid_argument` naming the first offending field.
struct ScenarioConfig {
  int num_aps = 25;           // L
  int antennas_per_ap = 4;    // N
  int num_users = 8;          // K
  double area_side = 1000.0;  // meters
  double ap_height = 10.0;    // meters
  int pilot_len = 0;          // tau_p; 0 means "equal to num_users"
  double pilot_power = 0.1;   // W, per user
  double noise_ul = 3.9810717055349565e-13;  // W, -94 dBm
  double noise_dl = 3.9810717055349565e-13;  // W, -94 dBm
  double p_max = 1.0;                          // W, per-AP cap
  double eta_max = std::numbers::pi / 4.0;
  double eta_ideal = std::numbers::pi / 4.0;
  double angular_spread = 15.0 * std::numbers::pi / 180.0;  // radians
  int service_set_size = 0;  // |S_l|; 0 means min(K, tau_p)
  int mc_realizations = 500;
  std::uint64_t seed = 1;

  int effective_pilot_len() const { return pilot_len > 0 ? pilot_len : num_users; }
  int effective_service_set_size() const;

  void validate() const;
};

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// A drawn deployment. `covariances` is indexed `l * K + k`.
struct Scenario {
  ScenarioConfig config;
  std::vector<Point2> ap_positions;
  std::vector<Point2> user_positions;
  Eigen::MatrixXd beta;            // L x K, linear gain
  Eigen::MatrixXd nominal_angles;  // L x K, radians
  std::vector<Eigen::MatrixXcd> covariances;

  int num_aps() const { return config.num_aps; }
  int num_users() const { return config.num_users; }
  const Eigen::MatrixXcd& covariance(int l, int k) const {
    return covariances[static_cast<std::size_t>(l * num_users() + k)];
  }
};

/// Raised when a covariance cannot be factorized. Carries the link.
class CovarianceError : public std::runtime_error {
 public:
  CovarianceError(int ap, int user, const std::string& what)
      : std::runtime_error(what), ap_(ap), user_(user) {}
  int ap() const { return ap_; }
  int user() const { return user_; }

 private:
  int ap_;
  int user_;
};

/// Large-scale gain in linear units for a 3-D distance in meters.
double path_loss_gain(double distance_3d);

/// Draws AP/user positions and fills `beta` and `nominal_angles`. Covariances
/// are left empty; see `attach_covariances`.
Scenario generate_geometry(const ScenarioConfig& config);

/// One-ring spatial covariance of a half-wavelength ULA. Evaluated with a
/// 200-node Gauss-Legendre rule; `spread == 0` gives the rank-one limit.
Eigen::MatrixXcd one_ring_covariance(double beta, double angle, double spread,
                                     int antennas);

/// Computes `R_lk` for every link from geometry already present.
void attach_covariances(Scenario& scenario);

/// generate_geometry followed by attach_covariances.
Scenario generate_scenario(const ScenarioConfig& config);

/// Hermitian PSD square root after symmetrizing and clamping negative
/// eigenvalues. Throws if an eigenvalue lies below -1e-10 * trace / N.
Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& r, int ap = -1, int user = -1);

/// Channel realizations; `h[l*K + k]` is N x M with one column per realization.
struct ChannelSet {
  int num_aps = 0;
  int num_users = 0;
  int antennas = 0;
  int realizations = 0;
  std::vector<Eigen::MatrixXcd> h;

  const Eigen::MatrixXcd& link(int l, int k) const {
    return h[static_cast<std::size_t>(l * num_users + k)];
  }
};

/// h_lk = R_lk^{1/2} g, g ~ CN(0, I). Each link draws from its own substream.
ChannelSet sample_channels(const Scenario& scenario, int realizations,
                           std::uint64_t seed);

// Scenario files hold geometry only; covariances are rebuilt on load.
nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

}  // namespace cfpa
