#include "cfpa/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cfpa/json_fields.hpp"
#include "cfpa/rng.hpp"

namespace cfpa {

void SolverOptions::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid solver options: ") + what);
  };
  require(lambda0 > 0.0, "lambda0 must be > 0");
  require(zeta > 1.0, "zeta must be > 1");
  require(mu_s > 0.0, "mu_s must be > 0");
  require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(eps_feas >= 0.0, "eps_feas must be >= 0");
  require(max_penalty_iters >= 1, "max_penalty_iters must be >= 1");
  require(max_apg_iters >= 1, "max_apg_iters must be >= 1");
  require(alpha_init > 0.0, "alpha_init must be > 0");
  require(backtrack_factor > 0.0 && backtrack_factor < 1.0, "backtrack_factor must lie in (0, 1)");
  require(max_backtracks >= 0, "max_backtracks must be >= 0");
  require(power_weight >= 0.0, "power_weight must be >= 0");
  require(init_scale >= 0.0, "init_scale must be >= 0");
}

void to_json(nlohmann::json& j, const SolverOptions& o) {
  j = nlohmann::json{{"lambda0", o.lambda0},
                     {"zeta", o.zeta},
                     {"mu_s", o.mu_s},
                     {"tau", o.tau},
                     {"epsilon", o.epsilon},
                     {"eps_feas", o.eps_feas},
                     {"max_penalty_iters", o.max_penalty_iters},
                     {"max_apg_iters", o.max_apg_iters},
                     {"alpha_init", o.alpha_init},
                     {"backtrack_factor", o.backtrack_factor},
                     {"max_backtracks", o.max_backtracks},
                     {"model", to_string(o.model)},
                     {"power_weight", o.power_weight},
                     {"init_seed", o.init_seed},
                     {"init_scale", o.init_scale}};
}

void from_json(const nlohmann::json& j, SolverOptions& o) {
  read_optional(j, "lambda0", o.lambda0);
  read_optional(j, "zeta", o.zeta);
  read_optional(j, "mu_s", o.mu_s);
  read_optional(j, "tau", o.tau);
  read_optional(j, "epsilon", o.epsilon);
  read_optional(j, "eps_feas", o.eps_feas);
  read_optional(j, "max_penalty_iters", o.max_penalty_iters);
  read_optional(j, "max_apg_iters", o.max_apg_iters);
  read_optional(j, "alpha_init", o.alpha_init);
  read_optional(j, "backtrack_factor", o.backtrack_factor);
  read_optional(j, "max_backtracks", o.max_backtracks);
  if (j.contains("model")) o.model = parse_power_model(read_required<std::string>(j, "model"));
  read_optional(j, "power_weight", o.power_weight);
  read_optional(j, "init_seed", o.init_seed);
  read_optional(j, "init_scale", o.init_scale);
}

Eigen::VectorXd gradient(const Eigen::VectorXd& x, double lambda, const ProblemData& data,
                         const SolverOptions& options) {
  const int K = data.num_users;
  const int L = data.num_aps;
  if (x.size() != data.dimension()) throw std::invalid_argument("gradient: wrong dimension");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());

  if (options.power_weight != 0.0) {
    if (options.model == PowerModel::Ideal) {
      grad = (2.0 * options.power_weight / data.eta) * x;
    } else {
      const double w = options.power_weight * std::sqrt(data.p_max) / data.eta_max;
      for (int l = 0; l < L; ++l) {
        // x_l is the stride-L slice starting at l.
        Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>> xl(
            x.data() + l, K, Eigen::InnerStride<>(L));
        const double factor = smoothed_norm(xl.norm(), options.mu_s).gradient_factor;
        if (factor == 0.0) continue;
        Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<>> gl(grad.data() + l, K,
                                                               Eigen::InnerStride<>(L));
        gl += (w * factor) * xl;
      }
    }
  }

  if (lambda == 0.0) return grad;
  const double s2 = data.sigma_dl * data.sigma_dl;
  Eigen::VectorXd ck_x(x.size());
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      ck_x.segment(i * L, L).noalias() = data.block(k, i) * x.segment(i * L, L);
    }
    const double s = std::sqrt(x.dot(ck_x) + s2);
    const double a = data.target_factor(k);
    const double g = s - a * data.b_tilde.col(k).dot(x);
    if (g <= 0.0) continue;
    grad += (2.0 * lambda * g) * (ck_x / s - a * data.b_tilde.col(k));
  }
  return grad;
}

Eigen::VectorXd project(const Eigen::VectorXd& x, const ProblemData& data) {
  if (x.size() != data.dimension()) throw std::invalid_argument("project: wrong dimension");
  const int K = data.num_users;
  const int L = data.num_aps;
  const double cap = std::sqrt(data.p_max);
  Eigen::VectorXd out = x.cwiseMax(0.0);
  for (int l = 0; l < L; ++l) {
    Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<>> xl(out.data() + l, K,
                                                           Eigen::InnerStride<>(L));
    const double norm = xl.norm();
    if (norm > cap) xl *= cap / norm;
  }
  return out;
}

ArmijoResult armijo_step(const Eigen::VectorXd& y, double f_y, const Eigen::VectorXd& grad,
                         const Objective& f, const Projection& proj, double alpha_start,
                         const SolverOptions& options) {
  const double grad_sq = grad.squaredNorm();
  ArmijoResult r;
  double alpha = alpha_start;
  for (int b = 0;; ++b) {
    r.candidate = proj(y - alpha * grad);
    r.candidate_value = f(r.candidate);
    r.alpha = alpha;
    r.backtracks = b;
    if (f_y - r.candidate_value >= options.tau * alpha * grad_sq) return r;
    if (b >= options.max_backtracks) break;
    alpha *= options.backtrack_factor;
  }
  r.stalled = true;
  return r;
}

ApgResult apg_minimize(const ProblemData& data, double lambda, const Eigen::VectorXd& x0,
                       const SolverOptions& options) {
  const Objective f = [&](const Eigen::VectorXd& v) {
    return penalized_cost(v, lambda, options.model, data, options.mu_s, options.power_weight);
  };
  const Projection proj = [&](const Eigen::VectorXd& v) { return project(v, data); };

  ApgResult out;
  Eigen::VectorXd x = proj(x0);
  Eigen::VectorXd x_prev = x;
  Eigen::VectorXd z = x;
  double f_x = f(x);
  double m_prev = 1.0;
  double m = 1.0;
  double alpha_prev = options.alpha_init / 2.0;

  for (int t = 1; t <= options.max_apg_iters; ++t) {
    const Eigen::VectorXd y =
        x + (m_prev / m) * (z - x) + ((m_prev - 1.0) / m) * (x - x_prev);
    const double f_y = f(y);
    const Eigen::VectorXd g = gradient(y, lambda, data, options);
    ArmijoResult step = armijo_step(y, f_y, g, f, proj,
                                    std::min(options.alpha_init, 2.0 * alpha_prev), options);
    if (step.stalled) ++out.stalls;
    alpha_prev = step.alpha;
    z = std::move(step.candidate);

    x_prev = x;
    double f_next = f_x;
    bool accepted = false;
    if (step.candidate_value <= f_x) {
      x = z;
      f_next = step.candidate_value;
      accepted = true;
      m_prev = m;
      m = next_momentum(m);
    } else {
      // Restart: the next step is a plain projected-gradient step from x.
      z = x;
      m_prev = 1.0;
      m = 1.0;
    }
    out.iterations = t;
    if (options.record_history) out.history.push_back(f_next);

    // f_next == 0 is an exact minimizer of a nonnegative objective.
    const bool done = (accepted && f_x - f_next < options.epsilon * f_next) || f_next == 0.0;
    f_x = f_next;
    if (done) break;
    if (t == options.max_apg_iters) out.cap_hit = true;
  }
  out.x = std::move(x);
  out.value = f_x;
  return out;
}

std::vector<bool> users_meeting_targets(const Eigen::VectorXd& x, const ProblemData& data,
                                        double eps) {
  std::vector<bool> ok(static_cast<std::size_t>(data.num_users));
  const double s2 = data.sigma_dl * data.sigma_dl;
  for (int k = 0; k < data.num_users; ++k) {
    const double scale = std::sqrt(quadratic_form(x, k, data) + s2);
    ok[static_cast<std::size_t>(k)] = std::max(constraint_g(x, k, data), 0.0) <= eps * scale;
  }
  return ok;
}

SolverResult penalty_minimize(const ProblemData& data, const SolverOptions& options) {
  options.validate();
  if (!data.has_targets()) throw std::invalid_argument("penalty_minimize: problem has no targets");
  const auto start = std::chrono::steady_clock::now();

  auto rng = substream(options.init_seed, Stream::SolverInit);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(data.dimension());
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = options.init_scale * unit(rng);

  SolverResult res;
  res.model = options.model;
  std::vector<bool> ok;
  for (int i = 0; i < options.max_penalty_iters; ++i) {
    // lambda0 * zeta^i directly; repeated multiplication drifts in the last bits.
    const double lambda = options.lambda0 * std::pow(options.zeta, i);
    ApgResult inner = apg_minimize(data, lambda, x, options);
    x = std::move(inner.x);

    PenaltyIteration it;
    it.index = i;
    it.lambda = lambda;
    it.apg_iters = inner.iterations;
    it.f_value = inner.value;
    it.max_violation = constraint_values(x, data).cwiseMax(0.0).maxCoeff();
    it.stalls = inner.stalls;
    it.apg_cap_hit = inner.cap_hit;
    it.history = std::move(inner.history);
    res.trace.push_back(std::move(it));
    res.apg_iters_total += inner.iterations;
    res.penalty_iters = i + 1;

    ok = users_meeting_targets(x, data, options.eps_feas);
    if (std::all_of(ok.begin(), ok.end(), [](bool b) { return b; })) break;
  }

  res.x = x;
  res.user_feasible = ok;
  res.feasible = std::all_of(ok.begin(), ok.end(), [](bool b) { return b; });
  res.margins = constraint_values(x, data);
  res.per_ap_tx = per_ap_transmit_power(x, data);
  const ConsumedPower ideal = consumed_power(x, PowerModel::Ideal, data);
  const ConsumedPower nl = consumed_power(x, PowerModel::NonLinear, data);
  res.per_ap_consumed_ideal = ideal.per_ap;
  res.per_ap_consumed_nonlinear = nl.per_ap;
  res.consumed_ideal = ideal.total;
  res.consumed_nonlinear = nl.total;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

nlohmann::json result_to_json(const SolverResult& r) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& it : r.trace) {
    nlohmann::json e{{"penalty_iter", it.index},
                     {"lambda", it.lambda},
                     {"apg_iters", it.apg_iters},
                     {"f_value", it.f_value},
                     {"max_violation", it.max_violation},
                     {"stalls", it.stalls},
                     {"apg_cap_hit", it.apg_cap_hit}};
    if (!it.history.empty()) e["history"] = it.history;
    trace.push_back(std::move(e));
  }
  return nlohmann::json{{"model", to_string(r.model)},
                        {"feasible", r.feasible},
                        {"user_feasible", r.user_feasible},
                        {"margins", vec(r.margins)},
                        {"x", vec(r.x)},
                        {"per_ap_tx", vec(r.per_ap_tx)},
                        {"per_ap_consumed_ideal", vec(r.per_ap_consumed_ideal)},
                        {"per_ap_consumed_nonlinear", vec(r.per_ap_consumed_nonlinear)},
                        {"consumed_ideal", r.consumed_ideal},
                        {"consumed_nonlinear", r.consumed_nonlinear},
                        {"penalty_iters", r.penalty_iters},
                        {"apg_iters_total", r.apg_iters_total},
                        {"wall_time_s", r.wall_time_s},
                        {"trace", trace}};
}

std::string trace_to_csv(const SolverResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "penalty_iter,lambda,apg_iters,f_value,max_violation\n";
  for (const auto& it : r.trace) {
    os << it.index << ',' << it.lambda << ',' << it.apg_iters << ',' << it.f_value << ','
       << it.max_violation << '\n';
  }
  return os.str();
}

}  // namespace cfpa
