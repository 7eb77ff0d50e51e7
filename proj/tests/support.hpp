#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cfpa/problem.hpp"
#include "cfpa/statistics.hpp"

namespace cfpa::test {

// K = L = 1 statistics with b, c and sigma^2 given directly.
inline EffectiveStatistics scalar_stats(double b, double c, double sigma2 = 1.0) {
  EffectiveStatistics s;
  s.num_users = 1;
  s.num_aps = 1;
  s.sigma_dl2 = sigma2;
  s.b = Eigen::MatrixXd::Constant(1, 1, b);
  s.c = {Eigen::MatrixXd::Constant(1, 1, c)};
  return s;
}

inline ProblemData scalar_problem(double b, double c, double sigma2, double gamma,
                                  double p_max = 1.0) {
  PowerParams pw;
  pw.p_max = p_max;
  return assemble(scalar_stats(b, c, sigma2), pw, Targets::sinr({gamma}), false);
}

// Random statistics with PSD blocks and C_kk = b_k b_k^T + A A^T, so second
// moments dominate squared means.
inline EffectiveStatistics random_stats(int K, int L, std::mt19937_64& rng,
                                        double interference = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EffectiveStatistics s;
  s.num_users = K;
  s.num_aps = L;
  s.sigma_dl2 = 1.0;
  s.b.resize(K, L);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) s.b(k, l) = 0.2 + u(rng);
  }
  s.c.resize(static_cast<std::size_t>(K * K));
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < K; ++i) {
      Eigen::MatrixXd a(L, L);
      for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) a(r, c) = u(rng);
      }
      Eigen::MatrixXd blk = (k == i ? 0.1 : interference) * a * a.transpose();
      if (k == i) blk += s.b.row(k).transpose() * s.b.row(k);
      s.block(k, i) = 0.5 * (blk + blk.transpose());
    }
  }
  return s;
}

inline Eigen::VectorXd random_allocation(int n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) x(j) = u(rng);
  return x;
}

}  // namespace cfpa::test
