#include "cfpa/problem.hpp"

#include <cmath>
#include <stdexcept>

#include "cfpa/json_fields.hpp"
#include "cfpa/smoothing.hpp"

namespace cfpa {
namespace {

Eigen::MatrixXd block_root(const Eigen::MatrixXd& block, int k, int i) {
  const Eigen::Index n = block.rows();
  if (block.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd sym = 0.5 * (block + block.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const double trace = sym.trace();
  if (eig.info() != Eigen::Success ||
      eig.eigenvalues().minCoeff() < -1e-10 * std::abs(trace) / static_cast<double>(n)) {
    throw std::invalid_argument("assemble: block C_" + std::to_string(k) + "," +
                                std::to_string(i) + " is not positive semidefinite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

void check_x(const Eigen::VectorXd& x, const ProblemData& data) {
  if (x.size() != data.dimension()) {
    throw std::invalid_argument("allocation has " + std::to_string(x.size()) +
                                " entries, expected K*L = " + std::to_string(data.dimension()));
  }
}

void check_targets(const ProblemData& data) {
  if (!data.has_targets()) throw std::logic_error("problem has no SINR targets");
}

}  // namespace

std::string to_string(PowerModel model) {
  return model == PowerModel::Ideal ? "ideal" : "non-linear";
}

PowerModel parse_power_model(const std::string& name) {
  if (name == "ideal") return PowerModel::Ideal;
  if (name == "non-linear" || name == "nonlinear") return PowerModel::NonLinear;
  throw std::invalid_argument("unknown power model '" + name + "'");
}

double ProblemData::target_factor(int k) const {
  const double g = gamma_bar(k);
  return std::sqrt((1.0 + g) / g);
}

double se_to_sinr(double se) { return std::exp2(se) - 1.0; }
double sinr_to_se(double sinr) { return std::log2(1.0 + sinr); }

ProblemData assemble(const EffectiveStatistics& stats, const PowerParams& power,
                     const std::optional<Targets>& targets, bool normalize_noise) {
  const int K = stats.num_users;
  const int L = stats.num_aps;
  if (K < 1 || L < 1 || stats.b.rows() != K || stats.b.cols() != L ||
      stats.c.size() != static_cast<std::size_t>(K * K)) {
    throw std::invalid_argument("assemble: statistics have inconsistent shapes");
  }
  if (!(stats.sigma_dl2 > 0.0)) throw std::invalid_argument("assemble: sigma_dl2 must be > 0");
  if (!(power.p_max > 0.0)) throw std::invalid_argument("assemble: p_max must be > 0");
  if (!(power.eta_max > 0.0 && power.eta_max <= 1.0)) {
    throw std::invalid_argument("assemble: eta_max must lie in (0, 1]");
  }
  if (!(power.eta > 0.0 && power.eta <= 1.0)) {
    throw std::invalid_argument("assemble: eta must lie in (0, 1]");
  }
  if ((stats.b.array() < 0.0).any()) throw std::invalid_argument("assemble: b must be >= 0");

  ProblemData d;
  d.num_users = K;
  d.num_aps = L;
  d.noise_power = stats.sigma_dl2;
  d.p_max = power.p_max;
  d.eta_max = power.eta_max;
  d.eta = power.eta;

  const double scale2 = normalize_noise ? 1.0 / stats.sigma_dl2 : 1.0;
  d.sigma_dl = normalize_noise ? 1.0 : std::sqrt(stats.sigma_dl2);
  d.b = stats.b * std::sqrt(scale2);
  d.b_tilde = Eigen::MatrixXd::Zero(K * L, K);
  for (int k = 0; k < K; ++k) d.b_tilde.col(k).segment(k * L, L) = d.b.row(k).transpose();

  d.c.reserve(stats.c.size());
  d.c_sqrt.reserve(stats.c.size());
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      const Eigen::MatrixXd& raw = stats.block(k, i);
      if (raw.rows() != L || raw.cols() != L) {
        throw std::invalid_argument("assemble: block C_" + std::to_string(k) + "," +
                                    std::to_string(i) + " has the wrong shape");
      }
      Eigen::MatrixXd blk = 0.5 * (raw + raw.transpose()) * scale2;
      d.c_sqrt.push_back(block_root(blk, k, i));
      d.c.push_back(std::move(blk));
    }
  }

  if (targets) {
    const auto& v = targets->values;
    if (v.size() != 1 && v.size() != static_cast<std::size_t>(K)) {
      throw std::invalid_argument("assemble: need 1 or K targets");
    }
    d.gamma_bar.resize(K);
    for (int k = 0; k < K; ++k) {
      const double t = v.size() == 1 ? v.front() : v[static_cast<std::size_t>(k)];
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw std::invalid_argument("assemble: targets must be positive and finite");
      }
      d.gamma_bar(k) = targets->kind == Targets::Kind::SpectralEfficiency ? se_to_sinr(t) : t;
    }
  }
  return d;
}

ProblemData with_common_target(const ProblemData& data, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("with_common_target: gamma must be > 0");
  ProblemData out = data;
  out.gamma_bar = Eigen::VectorXd::Constant(data.num_users, gamma);
  return out;
}

Eigen::VectorXd gather_ap(const Eigen::VectorXd& x, int l, const ProblemData& data) {
  check_x(x, data);
  if (l < 0 || l >= data.num_aps) throw std::out_of_range("gather_ap: AP index out of range");
  return Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(
      x.data() + l, data.num_users, Eigen::InnerStride<>(data.num_aps));
}

double transmit_power(const Eigen::VectorXd& x, int l, const ProblemData& data) {
  return gather_ap(x, l, data).squaredNorm();
}

Eigen::VectorXd per_ap_transmit_power(const Eigen::VectorXd& x, const ProblemData& data) {
  check_x(x, data);
  const Eigen::Map<const Eigen::MatrixXd> rho(x.data(), data.num_aps, data.num_users);
  return rho.rowwise().squaredNorm();
}

ConsumedPower consumed_power(const Eigen::VectorXd& x, PowerModel model,
                             const ProblemData& data) {
  ConsumedPower out;
  const Eigen::VectorXd ptx = per_ap_transmit_power(x, data);
  if (model == PowerModel::Ideal) {
    out.per_ap = ptx / data.eta;
  } else {
    out.per_ap = (ptx * data.p_max).cwiseSqrt() / data.eta_max;
  }
  out.total = out.per_ap.sum();
  return out;
}

double quadratic_form(const Eigen::VectorXd& x, int k, const ProblemData& data) {
  check_x(x, data);
  const int L = data.num_aps;
  double q = 0.0;
  for (int i = 0; i < data.num_users; ++i) {
    const auto rho = x.segment(i * L, L);
    q += rho.dot(data.block(k, i) * rho);
  }
  return q;
}

Eigen::VectorXd sinr(const Eigen::VectorXd& x, const ProblemData& data) {
  const double s2 = data.sigma_dl * data.sigma_dl;
  Eigen::VectorXd out(data.num_users);
  for (int k = 0; k < data.num_users; ++k) {
    const double signal = data.b_tilde.col(k).dot(x);
    const double sig2 = signal * signal;
    const double denom = quadratic_form(x, k, data) - sig2 + s2;
    if (!(denom > 0.0)) {
      throw std::runtime_error("sinr: non-positive denominator for user " + std::to_string(k) +
                               " (statistics inconsistent)");
    }
    out(k) = sig2 / denom;
  }
  return out;
}

double constraint_g(const Eigen::VectorXd& x, int k, const ProblemData& data) {
  check_targets(data);
  if (k < 0 || k >= data.num_users) throw std::out_of_range("constraint_g: user out of range");
  const double q = quadratic_form(x, k, data);
  return std::sqrt(q + data.sigma_dl * data.sigma_dl) -
         data.target_factor(k) * data.b_tilde.col(k).dot(x);
}

Eigen::VectorXd constraint_values(const Eigen::VectorXd& x, const ProblemData& data) {
  Eigen::VectorXd g(data.num_users);
  for (int k = 0; k < data.num_users; ++k) g(k) = constraint_g(x, k, data);
  return g;
}

Eigen::VectorXd penalty_terms(const Eigen::VectorXd& x, const ProblemData& data) {
  return constraint_values(x, data).cwiseMax(0.0).array().square();
}

double penalized_cost(const Eigen::VectorXd& x, double lambda, PowerModel model,
                      const ProblemData& data, double mu_s, double power_weight) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("penalized_cost: lambda must be >= 0");
  double power = 0.0;
  if (power_weight != 0.0) {
    const Eigen::VectorXd ptx = per_ap_transmit_power(x, data);
    if (model == PowerModel::Ideal) {
      power = ptx.sum() / data.eta;
    } else {
      const double w = std::sqrt(data.p_max) / data.eta_max;
      for (Eigen::Index l = 0; l < ptx.size(); ++l) {
        power += w * smoothed_norm(std::sqrt(ptx(l)), mu_s).value;
      }
    }
    power *= power_weight;
  }
  const double penalty = lambda == 0.0 ? 0.0 : lambda * penalty_terms(x, data).sum();
  return power + penalty;
}

std::optional<double> relative_saving(const Eigen::VectorXd& x_ideal_opt,
                                      const Eigen::VectorXd& x_nl_opt,
                                      const ProblemData& data) {
  const double p_ideal = consumed_power(x_ideal_opt, PowerModel::NonLinear, data).total;
  const double p_nl = consumed_power(x_nl_opt, PowerModel::NonLinear, data).total;
  if (p_ideal == 0.0) return std::nullopt;
  return (p_ideal - p_nl) / p_ideal;
}

ProblemData problem_from_json(const nlohmann::json& j, bool normalize_noise) {
  const EffectiveStatistics stats = statistics_from_json(j);
  PowerParams power;
  if (j.contains("power_model")) {
    const auto& pm = j.at("power_model");
    read_optional(pm, "p_max", power.p_max);
    read_optional(pm, "eta_max", power.eta_max);
    read_optional(pm, "eta", power.eta);
  }
  std::optional<Targets> targets;
  if (j.contains("se_targets")) {
    targets = Targets::se(read_required<std::vector<double>>(j, "se_targets"));
  }
  return assemble(stats, power, targets, normalize_noise);
}

nlohmann::json problem_inputs_to_json(const EffectiveStatistics& stats,
                                      const PowerParams& power,
                                      const std::vector<double>& se_targets) {
  nlohmann::json j = statistics_to_json(stats);
  j["power_model"] = {{"p_max", power.p_max}, {"eta_max", power.eta_max}, {"eta", power.eta}};
  if (!se_targets.empty()) j["se_targets"] = se_targets;
  return j;
}

}  // namespace cfpa
