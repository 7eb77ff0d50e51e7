#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cfpa/oracle.hpp"
#include "support.hpp"

using namespace cfpa;
using cfpa::test::random_stats;
using cfpa::test::scalar_problem;
using cfpa::test::scalar_stats;

namespace {

// Plain exhaustive scan in lexicographic order, strict improvement only,
// with the same 1e-12 relative cap slack as grid_search.
OracleReport naive_grid(const ProblemData& d, double res, PowerModel model) {
  const int n = d.dimension();
  const long long top = static_cast<long long>(std::floor(std::sqrt(d.p_max) / res + 1e-9));
  std::vector<long long> idx(static_cast<std::size_t>(n), 0);
  OracleReport best;
  best.objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(n);
  while (true) {
    for (int j = 0; j < n; ++j) x(j) = static_cast<double>(idx[static_cast<std::size_t>(j)]) * res;
    bool ok = true;
    for (int l = 0; l < d.num_aps && ok; ++l) ok = transmit_power(x, l, d) <= d.p_max * (1.0 + 1e-12);
    for (int k = 0; k < d.num_users && ok; ++k) ok = constraint_g(x, k, d) <= 0.0;
    if (ok) {
      const double obj = consumed_power(x, model, d).total;
      if (obj < best.objective) {
        best.objective = obj;
        best.x_best = x;
        best.feasible = true;
      }
    }
    int j = n - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == top) idx[static_cast<std::size_t>(j--)] = 0;
    if (j < 0) break;
    ++idx[static_cast<std::size_t>(j)];
  }
  return best;
}

}  // namespace

TEST_CASE("single-link closed form") {
  const ProblemData d = scalar_problem(1.0, 2.0, 1.0, 0.5);
  const OracleReport r = single_link_closed_form(d, PowerModel::NonLinear);
  CHECK(r.feasible);
  CHECK(r.x_best(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sinr(r.x_best, d)(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.objective == consumed_power(r.x_best, PowerModel::NonLinear, d).total);

  CHECK_FALSE(single_link_closed_form(with_common_target(d, 1.0), PowerModel::NonLinear).feasible);
  CHECK_FALSE(single_link_closed_form(with_common_target(d, 3.0), PowerModel::NonLinear).feasible);
  CHECK(single_link_closed_form(with_common_target(d, 1e-12), PowerModel::Ideal).objective < 1e-11);
  CHECK_FALSE(single_link_closed_form(scalar_problem(1.0, 2.0, 1.0, 0.5, 0.5), PowerModel::Ideal).feasible);

  std::mt19937_64 rng(1);
  const ProblemData big = assemble(random_stats(2, 1, rng), {}, Targets::sinr({1.0}));
  CHECK_THROWS_AS(single_link_closed_form(big, PowerModel::Ideal), std::invalid_argument);
}

TEST_CASE("grid search") {
  SUBCASE("scalar instance within one Lipschitz step") {
    const ProblemData d = scalar_problem(1.0, 2.0, 1.0, 0.3);
    const OracleReport cf = single_link_closed_form(d, PowerModel::NonLinear);
    const OracleReport g = grid_search(d, 1e-3, PowerModel::NonLinear);
    REQUIRE(g.feasible);
    CHECK(g.objective >= cf.objective);
    CHECK(g.objective - cf.objective <= std::sqrt(d.p_max) / d.eta_max * 1e-3);
    CHECK(g.objective == consumed_power(g.x_best, PowerModel::NonLinear, d).total);
  }
  SUBCASE("infeasibility agrees with the closed form") {
    const ProblemData d = scalar_problem(1.0, 2.0, 1.0, 2.0);
    CHECK_FALSE(single_link_closed_form(d, PowerModel::NonLinear).feasible);
    CHECK_FALSE(grid_search(d, 1e-2, PowerModel::NonLinear).feasible);
  }
  SUBCASE("matches a plain exhaustive scan") {
    std::mt19937_64 rng(31);
    const std::pair<int, int> shapes[] = {{2, 1}, {1, 2}, {3, 1}, {2, 2}, {1, 3}};
    for (int t = 0; t < 10; ++t) {
      const auto [K, L] = shapes[t % 5];
      PowerParams pw;
      pw.p_max = 1.0;
      const ProblemData d =
          assemble(random_stats(K, L, rng, 0.02), pw, Targets::sinr({0.8 + 0.4 * (t % 3)}));
      const double res = K * L >= 4 ? 0.1 : 0.04;
      for (PowerModel model : {PowerModel::NonLinear, PowerModel::Ideal}) {
        const OracleReport fast = grid_search(d, res, model);
        const OracleReport slow = naive_grid(d, res, model);
        REQUIRE(fast.feasible == slow.feasible);
        if (!slow.feasible) continue;
        CHECK(fast.objective == doctest::Approx(slow.objective).epsilon(1e-12));
        CHECK((fast.x_best - slow.x_best).norm() <= 1e-12);
      }
    }
  }
  SUBCASE("halving the resolution never increases the objective") {
    std::mt19937_64 rng(4);
    const ProblemData d = assemble(random_stats(2, 2, rng, 0.02), {}, Targets::sinr({1.0}));
    double prev = std::numeric_limits<double>::infinity();
    for (double res : {0.08, 0.04, 0.02, 0.01}) {
      const double obj = grid_search(d, res, PowerModel::NonLinear).objective;
      CHECK(obj <= prev);
      prev = obj;
    }
  }
  SUBCASE("dimension guard") {
    std::mt19937_64 rng(2);
    const ProblemData d = assemble(random_stats(7, 1, rng), {}, Targets::sinr({1.0}));
    CHECK_THROWS_AS(grid_search(d, 0.1, PowerModel::Ideal), std::invalid_argument);
  }
}

TEST_CASE("feasibility check") {
  const ProblemData d = scalar_problem(1.0, 2.0, 1.0, 0.5);
  const FeasibilityReport zero = check_feasibility(Eigen::VectorXd::Zero(1), d, 1e-5);
  CHECK_FALSE(zero.user_ok[0]);
  CHECK_FALSE(zero.all_ok);
  const FeasibilityReport edge = check_feasibility(Eigen::VectorXd::Ones(1), d, 0.0);
  CHECK(edge.margins(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(edge.all_ok);
  const FeasibilityReport over = check_feasibility(Eigen::VectorXd::Constant(1, 1.01), d, 1e-9);
  CHECK_FALSE(over.ap_ok[0]);
  const SolverResult r = penalty_minimize(d, SolverOptions{});
  CHECK(check_feasibility(r.x, d, 1e-5).all_ok);
}

TEST_CASE("max-min SINR") {
  SolverOptions o;
  SUBCASE("single link at full power") {
    const ProblemData d = assemble(scalar_stats(1.0, 2.0), {}, std::nullopt, false);
    const MaxMinReport r = max_min_sinr(d, o, 1e-3);
    REQUIRE(r.se.has_value());
    CHECK(*r.se <= sinr_to_se(0.5) + 1e-9);
    CHECK(*r.se >= sinr_to_se(0.5) - 1e-3);
    CHECK(r.se_upper - r.se_lower <= 1e-3);
  }
  SUBCASE("a duplicate AP helps") {
    EffectiveStatistics two;
    two.num_users = 1;
    two.num_aps = 2;
    two.sigma_dl2 = 1.0;
    two.b = Eigen::MatrixXd::Ones(1, 2);
    two.c = {Eigen::MatrixXd::Ones(2, 2) + Eigen::MatrixXd::Identity(2, 2)};
    const MaxMinReport one = max_min_sinr(assemble(scalar_stats(1.0, 2.0), {}, std::nullopt), o);
    const MaxMinReport dup = max_min_sinr(assemble(two, {}, std::nullopt), o);
    REQUIRE(one.se.has_value());
    REQUIRE(dup.se.has_value());
    CHECK(*dup.se > *one.se);
  }
  SUBCASE("bracket endpoints and monotonicity in the cap") {
    std::mt19937_64 rng(6);
    const EffectiveStatistics st = random_stats(2, 2, rng);
    double prev = 0.0;
    for (double p_max : {0.25, 1.0, 4.0}) {
      PowerParams pw;
      pw.p_max = p_max;
      const ProblemData d = assemble(st, pw, std::nullopt);
      const MaxMinReport r = max_min_sinr(d, o);
      REQUIRE(r.se.has_value());
      CHECK(penalty_minimize(with_common_target(d, se_to_sinr(r.se_lower)),
                             [&] { SolverOptions p = o; p.power_weight = 0.0; return p; }())
                .feasible);
      CHECK(r.se_upper - r.se_lower <= r.bisection_tol);
      CHECK(*r.se >= prev - r.bisection_tol);
      prev = *r.se;
    }
  }
}

TEST_CASE("oracle JSON") {
  const OracleReport r = single_link_closed_form(scalar_problem(1.0, 2.0, 1.0, 0.5), PowerModel::Ideal);
  const nlohmann::json j = oracle_to_json(r);
  CHECK(j.at("feasible") == true);
  CHECK(j.at("x_best").size() == 1);
  OracleReport none;
  CHECK(oracle_to_json(none).at("objective").is_null());
}
