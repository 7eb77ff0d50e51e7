#include "cfpa/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include <boost/math/quadrature/gauss.hpp>

#include "cfpa/json_fields.hpp"
#include "cfpa/rng.hpp"

namespace cfpa {
namespace {

constexpr int kScenarioFormatVersion = 1;
constexpr double kMinHorizontalDistance = 5.0;

void require(bool ok, const char* field, const char* rule) {
  if (!ok) {
    throw std::invalid_argument(std::string("invalid scenario config: ") + field +
                                " " + rule);
  }
}

}  // namespace

int ScenarioConfig::effective_service_set_size() const {
  if (service_set_size > 0) return service_set_size;
  return std::min(num_users, effective_pilot_len());
}

void ScenarioConfig::validate() const {
  require(num_aps >= 1, "L", "must be >= 1");
  require(antennas_per_ap >= 1, "N", "must be >= 1");
  require(num_users >= 1, "K", "must be >= 1");
  require(std::isfinite(area_side) && area_side >= 0.0, "area_side", "must be >= 0");
  require(std::isfinite(ap_height) && ap_height >= 0.0, "ap_height", "must be >= 0");
  require(effective_pilot_len() >= num_users, "pilot_len",
          "must be >= K (orthogonal pilots)");
  require(pilot_power > 0.0, "pilot_power", "must be > 0");
  require(noise_ul > 0.0, "noise_ul", "must be > 0");
  require(noise_dl > 0.0, "noise_dl", "must be > 0");
  require(p_max > 0.0, "p_max", "must be > 0");
  require(eta_max > 0.0 && eta_max <= 1.0, "eta_max", "must lie in (0, 1]");
  require(eta_ideal > 0.0 && eta_ideal <= 1.0, "eta_ideal", "must lie in (0, 1]");
  require(std::isfinite(angular_spread) && angular_spread >= 0.0, "angular_spread",
          "must be >= 0");
  const int s = effective_service_set_size();
  require(s >= 1 && s <= num_users, "service_set_size", "must lie in [1, K]");
  require(mc_realizations >= 1, "mc_realizations", "must be >= 1");
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"L", c.num_aps},
                     {"N", c.antennas_per_ap},
                     {"K", c.num_users},
                     {"area_side", c.area_side},
                     {"ap_height", c.ap_height},
                     {"pilot_len", c.effective_pilot_len()},
                     {"pilot_power", c.pilot_power},
                     {"noise_ul", c.noise_ul},
                     {"noise_dl", c.noise_dl},
                     {"p_max", c.p_max},
                     {"eta_max", c.eta_max},
                     {"eta_ideal", c.eta_ideal},
                     {"angular_spread", c.angular_spread},
                     {"service_set_size", c.effective_service_set_size()},
                     {"mc_realizations", c.mc_realizations},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  read_optional(j, "L", c.num_aps);
  read_optional(j, "N", c.antennas_per_ap);
  read_optional(j, "K", c.num_users);
  read_optional(j, "area_side", c.area_side);
  read_optional(j, "ap_height", c.ap_height);
  read_optional(j, "pilot_len", c.pilot_len);
  read_optional(j, "pilot_power", c.pilot_power);
  read_optional(j, "noise_ul", c.noise_ul);
  read_optional(j, "noise_dl", c.noise_dl);
  read_optional(j, "p_max", c.p_max);
  read_optional(j, "eta_max", c.eta_max);
  read_optional(j, "eta_ideal", c.eta_ideal);
  read_optional(j, "angular_spread", c.angular_spread);
  read_optional(j, "service_set_size", c.service_set_size);
  read_optional(j, "mc_realizations", c.mc_realizations);
  read_optional(j, "seed", c.seed);
}

double path_loss_gain(double distance_3d) {
  const double db = -30.5 - 36.7 * std::log10(distance_3d);
  return std::pow(10.0, db / 10.0);
}

Scenario generate_geometry(const ScenarioConfig& config) {
  config.validate();
  Scenario s;
  s.config = config;
  const int L = config.num_aps;
  const int K = config.num_users;

  auto rng = substream(config.seed, Stream::Geometry);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    const double x = config.area_side * unit(rng);
    const double y = config.area_side * unit(rng);
    return Point2{x, y};
  };
  s.ap_positions.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) s.ap_positions.push_back(draw());
  s.user_positions.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) s.user_positions.push_back(draw());

  s.beta.resize(L, K);
  s.nominal_angles.resize(L, K);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const double dx = s.user_positions[k].x - s.ap_positions[l].x;
      const double dy = s.user_positions[k].y - s.ap_positions[l].y;
      const double horizontal = std::max(std::hypot(dx, dy), kMinHorizontalDistance);
      s.beta(l, k) = path_loss_gain(std::hypot(horizontal, config.ap_height));
      s.nominal_angles(l, k) = std::atan2(dy, dx);
    }
  }
  return s;
}

Eigen::MatrixXcd one_ring_covariance(double beta, double angle, double spread,
                                     int antennas) {
  if (!(beta >= 0.0) || !(spread >= 0.0) || antennas < 1) {
    throw std::invalid_argument("one_ring_covariance: need beta >= 0, spread >= 0, N >= 1");
  }
  using Rule = boost::math::quadrature::gauss<double, 200>;
  const auto& nodes = Rule::abscissa();
  const auto& weights = Rule::weights();

  // First column r(d) = E[exp(j*pi*d*sin(phi))], phi uniform on angle +- spread.
  Eigen::VectorXcd first(antennas);
  if (spread == 0.0) {
    const double s = std::sin(angle);
    for (int d = 0; d < antennas; ++d) {
      first(d) = std::polar(1.0, std::numbers::pi * d * s);
    }
  } else {
    double weight_sum = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) weight_sum += 2.0 * weights[q];
    for (int d = 0; d < antennas; ++d) {
      std::complex<double> acc = 0.0;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        for (double sign : {1.0, -1.0}) {
          const double phi = angle + sign * spread * nodes[q];
          acc += weights[q] * std::polar(1.0, std::numbers::pi * d * std::sin(phi));
        }
      }
      first(d) = acc / weight_sum;
    }
    first(0) = 1.0;
  }

  Eigen::MatrixXcd r(antennas, antennas);
  for (int m = 0; m < antennas; ++m) {
    for (int n = 0; n < antennas; ++n) {
      r(m, n) = m >= n ? beta * first(m - n) : beta * std::conj(first(n - m));
    }
  }
  return r;
}

void attach_covariances(Scenario& scenario) {
  const auto& c = scenario.config;
  scenario.covariances.clear();
  scenario.covariances.reserve(static_cast<std::size_t>(c.num_aps * c.num_users));
  for (int l = 0; l < c.num_aps; ++l) {
    for (int k = 0; k < c.num_users; ++k) {
      scenario.covariances.push_back(
          one_ring_covariance(scenario.beta(l, k), scenario.nominal_angles(l, k),
                              c.angular_spread, c.antennas_per_ap));
    }
  }
}

Scenario generate_scenario(const ScenarioConfig& config) {
  Scenario s = generate_geometry(config);
  attach_covariances(s);
  return s;
}

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& r, int ap, int user) {
  const Eigen::Index n = r.rows();
  const Eigen::MatrixXcd herm = 0.5 * (r + r.adjoint());
  const double trace = herm.trace().real();
  if (trace == 0.0 && herm.cwiseAbs().maxCoeff() == 0.0) {
    return Eigen::MatrixXcd::Zero(n, n);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(herm);
  if (eig.info() != Eigen::Success) {
    throw CovarianceError(ap, user, "covariance eigendecomposition failed for link (" +
                                        std::to_string(ap) + ", " + std::to_string(user) + ")");
  }
  const double floor = -1e-10 * std::abs(trace) / static_cast<double>(n);
  if (eig.eigenvalues().minCoeff() < floor) {
    throw CovarianceError(ap, user, "covariance of link (" + std::to_string(ap) + ", " +
                                        std::to_string(user) +
                                        ") is not positive semidefinite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().adjoint();
}

ChannelSet sample_channels(const Scenario& scenario, int realizations,
                           std::uint64_t seed) {
  if (realizations < 1) throw std::invalid_argument("sample_channels: M must be >= 1");
  const int L = scenario.num_aps();
  const int K = scenario.num_users();
  if (scenario.covariances.size() != static_cast<std::size_t>(L * K)) {
    throw std::invalid_argument("sample_channels: scenario has no covariances");
  }
  ChannelSet set;
  set.num_aps = L;
  set.num_users = K;
  set.antennas = scenario.config.antennas_per_ap;
  set.realizations = realizations;
  set.h.reserve(static_cast<std::size_t>(L * K));

  const int n = set.antennas;
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXcd root = psd_sqrt(scenario.covariance(l, k), l, k);
      auto rng = substream(seed, Stream::Channel,
                           {static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(k)});
      ComplexNormal cn;
      Eigen::MatrixXcd g(n, realizations);
      for (int m = 0; m < realizations; ++m) {
        for (int a = 0; a < n; ++a) g(a, m) = cn(rng);
      }
      set.h.push_back(root * g);
    }
  }
  return set;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  auto points = [](const std::vector<Point2>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) arr.push_back({p.x, p.y});
    return arr;
  };
  return nlohmann::json{{"format_version", kScenarioFormatVersion},
                        {"config", s.config},
                        {"ap_positions", points(s.ap_positions)},
                        {"user_positions", points(s.user_positions)},
                        {"beta", flatten_row_major(s.beta)},
                        {"nominal_angles", flatten_row_major(s.nominal_angles)}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  check_format_version(j, kScenarioFormatVersion, "scenario");
  Scenario s;
  s.config = read_required<ScenarioConfig>(j, "config");
  s.config.validate();
  const int L = s.config.num_aps;
  const int K = s.config.num_users;

  auto points = [&](const char* field, int expected) {
    const auto raw = read_required<std::vector<std::array<double, 2>>>(j, field);
    if (static_cast<int>(raw.size()) != expected) {
      throw std::invalid_argument(std::string("field '") + field + "' has " +
                                  std::to_string(raw.size()) + " entries, expected " +
                                  std::to_string(expected));
    }
    std::vector<Point2> pts;
    for (const auto& p : raw) pts.push_back({p[0], p[1]});
    return pts;
  };
  s.ap_positions = points("ap_positions", L);
  s.user_positions = points("user_positions", K);
  s.beta = read_row_major(j, "beta", L, K);
  s.nominal_angles = read_row_major(j, "nominal_angles", L, K);
  attach_covariances(s);
  return s;
}

}  // namespace cfpa
