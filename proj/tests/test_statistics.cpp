#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cfpa/rng.hpp"
#include "cfpa/statistics.hpp"

using namespace cfpa;

namespace {

Scenario manual_scenario(int L, int K, int N, const std::vector<Eigen::MatrixXcd>& cov) {
  Scenario s;
  s.config.num_aps = L;
  s.config.num_users = K;
  s.config.antennas_per_ap = N;
  s.beta = Eigen::MatrixXd::Ones(L, K);
  s.nominal_angles = Eigen::MatrixXd::Zero(L, K);
  s.covariances = cov;
  return s;
}

ChannelSet deterministic_channels(int N, int M, const Eigen::VectorXcd& h) {
  ChannelSet c;
  c.num_aps = 1;
  c.num_users = 1;
  c.antennas = N;
  c.realizations = M;
  c.h = {h.replicate(1, M)};
  return c;
}

}  // namespace

TEST_CASE("MMSE estimate") {
  SUBCASE("noiseless limit returns the channel") {
    const Eigen::MatrixXcd r = Eigen::MatrixXcd::Identity(3, 3) + one_ring_covariance(1.0, 0.2, 0.3, 3);
    Scenario s = manual_scenario(1, 1, 3, {r});
    s.config.noise_ul = 1e-30;
    const ChannelSet ch = sample_channels(s, 50, 4);
    const EstimationModel est = estimate_channels(ch, s, 4);
    CHECK((est.estimate(0, 0) - ch.link(0, 0)).norm() / ch.link(0, 0).norm() < 1e-10);
  }
  SUBCASE("scalar-diagonal covariance matches the scalar filter") {
    const double rr = 2e-9;
    Scenario s = manual_scenario(1, 1, 2, {rr * Eigen::MatrixXcd::Identity(2, 2)});
    const ChannelSet ch = sample_channels(s, 40, 8);
    const EstimationModel est = estimate_channels(ch, s, 8);
    const auto& cfg = s.config;
    const double g = cfg.effective_pilot_len() * cfg.pilot_power;
    auto rng = substream(8, Stream::PilotNoise, {0, 0});
    ComplexNormal cn;
    Eigen::MatrixXcd y(2, 40);
    for (int m = 0; m < 40; ++m) {
      for (int a = 0; a < 2; ++a) y(a, m) = std::sqrt(cfg.noise_ul) * cn(rng);
    }
    y += std::sqrt(g) * ch.link(0, 0);
    const double filt = std::sqrt(g) * rr / (g * rr + cfg.noise_ul);
    CHECK((est.estimate(0, 0) - filt * y).norm() <= 1e-12 * est.estimate(0, 0).norm());
    const double err = rr - g * rr * rr / (g * rr + cfg.noise_ul);
    CHECK(est.error(0, 0)(0, 0).real() == doctest::Approx(err).epsilon(1e-9));
  }
  SUBCASE("zero covariance gives zero estimate and zero error") {
    const Scenario s = manual_scenario(1, 1, 2, {Eigen::MatrixXcd::Zero(2, 2)});
    const EstimationModel est = estimate_channels(sample_channels(s, 10, 1), s, 1);
    CHECK(est.estimate(0, 0).norm() == 0.0);
    CHECK(est.error(0, 0).norm() == 0.0);
  }
  SUBCASE("MMSE beats the raw scaled observation") {
    const double rr = 1e-11;
    Scenario s = manual_scenario(1, 1, 1, {Eigen::MatrixXcd::Constant(1, 1, rr)});
    const ChannelSet ch = sample_channels(s, 10000, 2);
    const EstimationModel est = estimate_channels(ch, s, 2);
    const double g = s.config.effective_pilot_len() * s.config.pilot_power;
    const double filt = std::sqrt(g) * rr / (g * rr + s.config.noise_ul);
    const Eigen::MatrixXcd raw = est.estimate(0, 0) / (filt * std::sqrt(g));
    const double mse_mmse = (est.estimate(0, 0) - ch.link(0, 0)).squaredNorm();
    const double mse_raw = (raw - ch.link(0, 0)).squaredNorm();
    CHECK(mse_mmse <= mse_raw);
  }
}

TEST_CASE("service sets") {
  ScenarioConfig c;
  c.num_aps = 1;
  c.num_users = 3;
  Scenario s;
  s.config = c;
  s.beta = Eigen::MatrixXd(1, 3);
  s.beta << 3.0, 1.0, 2.0;
  CHECK(select_service_set(s, 0) == std::vector<int>{0, 2, 1});
  s.config.service_set_size = 2;
  CHECK(select_service_set(s, 0) == std::vector<int>{0, 2});
  s.beta.setConstant(1.0);
  s.config.service_set_size = 1;
  CHECK(select_service_set(s, 0) == std::vector<int>{0});
  CHECK_THROWS_AS(select_service_set(s, 1), std::out_of_range);
}

TEST_CASE("partial MMSE precoders") {
  SUBCASE("single user matches a direct solve and is normalized") {
    const Eigen::MatrixXcd r = one_ring_covariance(1e-9, 0.1, 0.2, 3);
    const Scenario s = manual_scenario(1, 1, 3, {r});
    const ChannelSet ch = sample_channels(s, 30, 5);
    const EstimationModel est = estimate_channels(ch, s, 5);
    const PrecoderSet w = pmmse_precoders(est, s);
    CHECK(w.active(0, 0));
    double mean = 0.0;
    Eigen::VectorXcd first;
    double scale = 0.0;
    for (int m = 0; m < 30; ++m) {
      const Eigen::VectorXcd h = est.estimate(0, 0).col(m);
      const Eigen::MatrixXcd a = s.config.pilot_power * (h * h.adjoint() + est.error(0, 0)) +
                                 s.config.noise_dl * Eigen::MatrixXcd::Identity(3, 3);
      const Eigen::VectorXcd direct = a.fullPivLu().solve(h);
      const Eigen::VectorXcd got = w.link(0, 0).col(m);
      if (m == 0) scale = got.norm() / direct.norm();
      CHECK((got - scale * direct).norm() <= 1e-8 * got.norm());
      mean += got.squaredNorm();
    }
    CHECK(mean / 30.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("zero estimate leaves the link inactive") {
    const Scenario s = manual_scenario(1, 2, 2,
                                       {Eigen::MatrixXcd::Zero(2, 2), one_ring_covariance(1e-9, 0.0, 0.2, 2)});
    const EstimationModel est = estimate_channels(sample_channels(s, 10, 1), s, 1);
    const PrecoderSet w = pmmse_precoders(est, s);
    CHECK_FALSE(w.active(0, 0));
    CHECK(w.link(0, 0).norm() == 0.0);
    CHECK(w.active(0, 1));
  }
}

TEST_CASE("expectations") {
  SUBCASE("deterministic channel and precoder") {
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(2);
    e1(0) = 1.0;
    const ChannelSet ch = deterministic_channels(2, 4, e1);
    PrecoderSet w;
    w.num_aps = 1;
    w.num_users = 1;
    w.w = {e1.replicate(1, 4)};
    w.active.setConstant(1, 1, true);
    const EffectiveStatistics st = estimate_expectations(ch, w, 1.0);
    CHECK(st.b(0, 0) == 1.0);
    CHECK(st.block(0, 0)(0, 0) == 1.0);
  }
  SUBCASE("needs two realizations") {
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Ones(1);
    const ChannelSet ch = deterministic_channels(1, 1, e1);
    PrecoderSet w;
    w.num_aps = 1;
    w.num_users = 1;
    w.w = {e1.replicate(1, 1)};
    w.active.setConstant(1, 1, true);
    CHECK_THROWS_AS(estimate_expectations(ch, w, 1.0), std::invalid_argument);
  }
  SUBCASE("realization order does not matter") {
    ScenarioConfig c;
    c.num_aps = 3;
    c.num_users = 2;
    c.mc_realizations = 200;
    c.seed = 19;
    const Scenario s = generate_scenario(c);
    const ChannelSet ch = sample_channels(s, 200, 19);
    const PrecoderSet w = pmmse_precoders(estimate_channels(ch, s, 19), s);
    std::vector<int> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    ChannelSet ch2 = ch;
    PrecoderSet w2 = w;
    for (std::size_t i = 0; i < ch.h.size(); ++i) {
      for (int m = 0; m < 200; ++m) {
        ch2.h[i].col(m) = ch.h[i].col(perm[static_cast<std::size_t>(m)]);
        w2.w[i].col(m) = w.w[i].col(perm[static_cast<std::size_t>(m)]);
      }
    }
    const EffectiveStatistics a = estimate_expectations(ch, w, c.noise_dl);
    const EffectiveStatistics b = estimate_expectations(ch2, w2, c.noise_dl);
    CHECK(a.b == b.b);
    for (std::size_t i = 0; i < a.c.size(); ++i) CHECK(a.c[i] == b.c[i]);
  }
  SUBCASE("default scenarios: nonnegative b, small clamped mass, Jensen dominance") {
    for (std::uint64_t seed : {1, 2}) {
      ScenarioConfig c;
      c.seed = seed;
      const EffectiveStatistics st = build_statistics(generate_scenario(c));
      CHECK((st.b.array() >= 0.0).all());
      CHECK(st.negative_mass_fraction < 0.01);
      for (int k = 0; k < st.num_users; ++k) {
        for (int l = 0; l < st.num_aps; ++l) {
          const double se = std::hypot(st.c_diag_stderr(k, l), 2.0 * st.b(k, l) * st.b_stderr(k, l));
          CHECK(st.block(k, k)(l, l) >= st.b(k, l) * st.b(k, l) - 3.0 * se);
        }
      }
      for (const auto& blk : st.c) {
        CHECK((blk - blk.transpose()).norm() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(blk).eigenvalues().minCoeff() >=
              -1e-12 * std::max(blk.trace(), 1e-300));
      }
    }
  }
}

TEST_CASE("M = 1e4 agrees with an M = 1e6 run") {
  ScenarioConfig c;
  c.num_aps = 2;
  c.num_users = 2;
  c.antennas_per_ap = 2;
  c.area_side = 200.0;
  c.seed = 3;
  Scenario s = generate_scenario(c);
  s.config.mc_realizations = 10000;
  const EffectiveStatistics lo = build_statistics(s);
  s.config.mc_realizations = 1000000;
  s.config.seed = 1003;
  const EffectiveStatistics hi = build_statistics(s);
  for (int k = 0; k < 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      const double se_b = std::hypot(lo.b_stderr(k, l), hi.b_stderr(k, l));
      CHECK(std::abs(lo.b(k, l) - hi.b(k, l)) <= 3.0 * se_b);
      const double se_c = std::hypot(lo.c_diag_stderr(k, l), hi.c_diag_stderr(k, l));
      CHECK(std::abs(lo.block(k, k)(l, l) - hi.block(k, k)(l, l)) <= 3.0 * se_c);
    }
  }
}

TEST_CASE("statistics JSON round trip") {
  std::mt19937_64 rng(1);
  ScenarioConfig c;
  c.num_aps = 3;
  c.num_users = 2;
  c.mc_realizations = 50;
  const EffectiveStatistics st = build_statistics(generate_scenario(c));
  const EffectiveStatistics back =
      statistics_from_json(nlohmann::json::parse(statistics_to_json(st).dump()));
  CHECK(back.b == st.b);
  CHECK(back.sigma_dl2 == st.sigma_dl2);
  for (std::size_t i = 0; i < st.c.size(); ++i) CHECK(back.c[i] == st.c[i]);
  nlohmann::json j = statistics_to_json(st);
  j["C"] = std::vector<double>{1.0};
  CHECK_THROWS_WITH(statistics_from_json(j), doctest::Contains("C"));
}
