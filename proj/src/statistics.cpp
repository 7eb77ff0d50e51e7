#include "cfpa/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cfpa/json_fields.hpp"
#include "cfpa/rng.hpp"

namespace cfpa {
namespace {

constexpr int kStatisticsFormatVersion = 1;
constexpr Eigen::Index kReductionChunk = 64;

// Sum that does not depend on the order of `values`.
double order_free_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

// Pairwise tree over already-computed chunk partials.
template <class T>
T pairwise_reduce(std::vector<T> parts) {
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(parts[i] + parts[i + 1]);
    if (parts.size() % 2 == 1) next.push_back(parts.back());
    parts = std::move(next);
  }
  return parts.front();
}

int compare_columns(const Eigen::MatrixXcd& a, Eigen::Index i, Eigen::Index j) {
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const auto x = a(r, i);
    const auto y = a(r, j);
    if (x.real() != y.real()) return x.real() < y.real() ? -1 : 1;
    if (x.imag() != y.imag()) return x.imag() < y.imag() ? -1 : 1;
  }
  return 0;
}

// Canonical realization order: lexicographic over the full (h, w) data.
std::vector<Eigen::Index> canonical_order(const ChannelSet& channels,
                                          const PrecoderSet& precoders) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(channels.realizations));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    for (const auto& h : channels.h) {
      if (const int c = compare_columns(h, i, j); c != 0) return c < 0;
    }
    for (const auto& w : precoders.w) {
      if (const int c = compare_columns(w, i, j); c != 0) return c < 0;
    }
    return false;
  });
  return order;
}

Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

EstimationModel estimate_channels(const ChannelSet& channels, const Scenario& scenario,
                                  std::uint64_t seed) {
  const auto& cfg = scenario.config;
  const int L = channels.num_aps;
  const int K = channels.num_users;
  const int N = channels.antennas;
  const int M = channels.realizations;
  if (cfg.effective_pilot_len() < K) {
    throw std::invalid_argument("estimate_channels: pilots must be orthogonal (tau_p >= K)");
  }
  const double pilot_gain = static_cast<double>(cfg.effective_pilot_len()) * cfg.pilot_power;
  const double root_gain = std::sqrt(pilot_gain);
  const double noise_std = std::sqrt(cfg.noise_ul);

  EstimationModel est;
  est.num_aps = L;
  est.num_users = K;
  est.h_hat.reserve(static_cast<std::size_t>(L * K));
  est.error_covariance.reserve(static_cast<std::size_t>(L * K));
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXcd& r = scenario.covariance(l, k);
      const Eigen::MatrixXcd q =
          pilot_gain * r + cfg.noise_ul * Eigen::MatrixXcd::Identity(N, N);
      Eigen::LDLT<Eigen::MatrixXcd> ldlt(q);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().real().minCoeff() <= 0.0) {
        throw CovarianceError(l, k, "estimate_channels: pilot observation covariance of link (" +
                                        std::to_string(l) + ", " + std::to_string(k) +
                                        ") is singular");
      }
      const Eigen::MatrixXcd q_inv_r = ldlt.solve(r);

      auto rng = substream(seed, Stream::PilotNoise,
                           {static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(k)});
      ComplexNormal cn;
      Eigen::MatrixXcd noise(N, M);
      for (int m = 0; m < M; ++m) {
        for (int a = 0; a < N; ++a) noise(a, m) = noise_std * cn(rng);
      }
      const Eigen::MatrixXcd y = root_gain * channels.link(l, k) + noise;
      // R Q^{-1} = (Q^{-1} R)^H since both are Hermitian.
      est.h_hat.push_back(root_gain * (q_inv_r.adjoint() * y));

      Eigen::MatrixXcd err = r - pilot_gain * r * q_inv_r;
      est.error_covariance.push_back(0.5 * (err + err.adjoint()));
    }
  }
  return est;
}

std::vector<int> select_service_set(const Scenario& scenario, int l) {
  const int K = scenario.num_users();
  if (l < 0 || l >= scenario.num_aps()) {
    throw std::out_of_range("select_service_set: AP index out of range");
  }
  std::vector<int> users(static_cast<std::size_t>(K));
  std::iota(users.begin(), users.end(), 0);
  std::stable_sort(users.begin(), users.end(), [&](int a, int b) {
    return scenario.beta(l, a) > scenario.beta(l, b);
  });
  users.resize(static_cast<std::size_t>(scenario.config.effective_service_set_size()));
  return users;
}

PrecoderSet pmmse_precoders(const EstimationModel& estimation, const Scenario& scenario) {
  const auto& cfg = scenario.config;
  const int L = estimation.num_aps;
  const int K = estimation.num_users;
  const int N = cfg.antennas_per_ap;
  const int M = static_cast<int>(estimation.h_hat.front().cols());
  const double p = cfg.pilot_power;

  PrecoderSet out;
  out.num_aps = L;
  out.num_users = K;
  out.w.assign(static_cast<std::size_t>(L * K), Eigen::MatrixXcd::Zero(N, M));
  out.active.setConstant(L, K, false);

  for (int l = 0; l < L; ++l) {
    std::vector<int> served = select_service_set(scenario, l);
    Eigen::MatrixXcd base = cfg.noise_dl * Eigen::MatrixXcd::Identity(N, N);
    for (int i : served) base += p * estimation.error(l, i);

    for (int m = 0; m < M; ++m) {
      Eigen::MatrixXcd a = base;
      for (int i : served) {
        const auto h = estimation.estimate(l, i).col(m);
        a.noalias() += p * h * h.adjoint();
      }
      Eigen::LLT<Eigen::MatrixXcd> llt(a);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error("pmmse_precoders: regularized matrix not positive definite at AP " +
                                 std::to_string(l));
      }
      for (int k : served) {
        out.w[static_cast<std::size_t>(l * K + k)].col(m) =
            llt.solve(estimation.estimate(l, k).col(m));
      }
    }

    for (int k : served) {
      auto& w = out.w[static_cast<std::size_t>(l * K + k)];
      std::vector<double> norms(static_cast<std::size_t>(M));
      for (int m = 0; m < M; ++m) norms[static_cast<std::size_t>(m)] = w.col(m).squaredNorm();
      const double mean = order_free_sum(std::move(norms)) / M;
      if (mean > 0.0 && std::isfinite(mean)) {
        w /= std::sqrt(mean);
        out.active(l, k) = true;
      } else {
        w.setZero();
      }
    }
    out.service_sets.push_back(std::move(served));
  }
  return out;
}

EffectiveStatistics estimate_expectations(const ChannelSet& channels,
                                          const PrecoderSet& precoders,
                                          double sigma_dl2) {
  const int L = channels.num_aps;
  const int K = channels.num_users;
  const Eigen::Index M = channels.realizations;
  if (M < 2) throw std::invalid_argument("estimate_expectations: need at least 2 realizations");
  if (precoders.num_aps != L || precoders.num_users != K ||
      precoders.w.front().cols() != M) {
    throw std::invalid_argument("estimate_expectations: channel/precoder shape mismatch");
  }
  const auto order = canonical_order(channels, precoders);
  const double inv_m = 1.0 / static_cast<double>(M);

  EffectiveStatistics st;
  st.num_users = K;
  st.num_aps = L;
  st.sigma_dl2 = sigma_dl2;
  st.realizations = static_cast<int>(M);
  st.b.resize(K, L);
  st.b_stderr.resize(K, L);
  st.c_diag_stderr.resize(K, L);
  st.c.resize(static_cast<std::size_t>(K * K));

  // a(l, m) = h_lk^H w_li for realization order[m].
  auto inner_products = [&](int k, int i) {
    Eigen::MatrixXcd a(L, M);
    for (int l = 0; l < L; ++l) {
      const auto& h = channels.link(l, k);
      const auto& w = precoders.link(l, i);
      for (Eigen::Index m = 0; m < M; ++m) {
        const Eigen::Index src = order[static_cast<std::size_t>(m)];
        a(l, m) = h.col(src).dot(w.col(src));
      }
    }
    return a;
  };

  const double eps = 1e-300;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      const Eigen::MatrixXcd a = inner_products(k, i);
      std::vector<Eigen::MatrixXcd> parts;
      std::vector<Eigen::VectorXcd> mean_parts;
      for (Eigen::Index start = 0; start < M; start += kReductionChunk) {
        const Eigen::Index len = std::min(kReductionChunk, M - start);
        const auto chunk = a.middleCols(start, len);
        parts.push_back(chunk * chunk.adjoint());
        if (k == i) mean_parts.push_back(chunk.rowwise().sum());
      }
      const Eigen::MatrixXcd second = pairwise_reduce(std::move(parts)) * inv_m;
      for (Eigen::Index r = 0; r < L; ++r) {
        for (Eigen::Index c = 0; c < L; ++c) {
          const auto v = second(r, c);
          st.max_imag_ratio =
              std::max(st.max_imag_ratio, std::abs(v.imag()) / (std::abs(v.real()) + eps));
        }
      }
      st.block(k, i) = repair_psd(second.real());

      if (k == i) {
        const Eigen::VectorXcd mean = pairwise_reduce(std::move(mean_parts)) * inv_m;
        double negative = 0.0;
        double total = 0.0;
        for (int l = 0; l < L; ++l) {
          const double re = mean(l).real();
          total += std::abs(re);
          if (re < 0.0) negative += -re;
          st.b(k, l) = std::max(re, 0.0);

          // Sample standard errors of Re(a) and |a|^2.
          double var_b = 0.0;
          double mean_sq = second(l, l).real();
          double var_sq = 0.0;
          for (Eigen::Index m = 0; m < M; ++m) {
            const double dr = a(l, m).real() - re;
            const double ds = std::norm(a(l, m)) - mean_sq;
            var_b += dr * dr;
            var_sq += ds * ds;
          }
          const double denom = static_cast<double>(M - 1) * static_cast<double>(M);
          st.b_stderr(k, l) = std::sqrt(var_b / denom);
          st.c_diag_stderr(k, l) = std::sqrt(var_sq / denom);
        }
        if (total > 0.0) {
          st.negative_mass_fraction = std::max(st.negative_mass_fraction, negative / total);
        }
      }
    }
  }
  return st;
}

EffectiveStatistics build_statistics(const Scenario& scenario) {
  const auto& cfg = scenario.config;
  const ChannelSet channels = sample_channels(scenario, cfg.mc_realizations, cfg.seed);
  const EstimationModel est = estimate_channels(channels, scenario, cfg.seed);
  const PrecoderSet w = pmmse_precoders(est, scenario);
  return estimate_expectations(channels, w, cfg.noise_dl);
}

nlohmann::json statistics_to_json(const EffectiveStatistics& st) {
  std::vector<double> c_flat;
  c_flat.reserve(static_cast<std::size_t>(st.num_users * st.num_users * st.num_aps * st.num_aps));
  for (const auto& block : st.c) {
    const auto flat = flatten_row_major(block);
    c_flat.insert(c_flat.end(), flat.begin(), flat.end());
  }
  return nlohmann::json{{"format_version", kStatisticsFormatVersion},
                        {"K", st.num_users},
                        {"L", st.num_aps},
                        {"sigma_dl2", st.sigma_dl2},
                        {"b", flatten_row_major(st.b)},
                        {"C", c_flat},
                        {"diagnostics",
                         {{"realizations", st.realizations},
                          {"max_imag_ratio", st.max_imag_ratio},
                          {"negative_mass_fraction", st.negative_mass_fraction}}}};
}

EffectiveStatistics statistics_from_json(const nlohmann::json& j) {
  check_format_version(j, kStatisticsFormatVersion, "statistics");
  EffectiveStatistics st;
  st.num_users = read_required<int>(j, "K");
  st.num_aps = read_required<int>(j, "L");
  if (st.num_users < 1) throw std::invalid_argument("field 'K' must be >= 1");
  if (st.num_aps < 1) throw std::invalid_argument("field 'L' must be >= 1");
  st.sigma_dl2 = read_required<double>(j, "sigma_dl2");
  if (!(st.sigma_dl2 > 0.0)) throw std::invalid_argument("field 'sigma_dl2' must be > 0");
  const int K = st.num_users;
  const int L = st.num_aps;
  st.b = read_row_major(j, "b", K, L);
  const Eigen::MatrixXd c_flat = read_row_major(j, "C", K * K * L, L);
  for (int blk = 0; blk < K * K; ++blk) st.c.push_back(c_flat.middleRows(blk * L, L));
  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    read_optional(d, "realizations", st.realizations);
    read_optional(d, "max_imag_ratio", st.max_imag_ratio);
    read_optional(d, "negative_mass_fraction", st.negative_mass_fraction);
  }
  return st;
}

}  // namespace cfpa
