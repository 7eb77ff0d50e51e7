#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cfpa/experiments.hpp"

using namespace cfpa;
namespace fs = std::filesystem;

namespace {

const std::string kData = CFPA_TEST_DATA_DIR;
const std::string kCli = CFPA_CLI_PATH;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cfpa_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Drops the wall_ms column so runs can be compared.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.erase(cells.begin() + 2);
    for (const auto& c : cells) out += c + ",";
    out += "\n";
  }
  return out;
}

ExperimentSpec small_spec(ExperimentKind kind) {
  ExperimentSpec s = ExperimentSpec::defaults(kind);
  s.scenario.mc_realizations = 100;
  s.scenario.num_users = 3;
  s.seeds = {1, 2};
  return s;
}

}  // namespace

TEST_CASE("median and log-log slope") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS(median({}));
  const auto s = log_log_slope({25, 50, 100}, {2.0 * 625, 2.0 * 2500, 2.0 * 10000});
  REQUIRE(s.has_value());
  CHECK(*s == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(log_log_slope({25}, {1.0}).has_value());
  CHECK_FALSE(log_log_slope({25, 25}, {1.0, 2.0}).has_value());
}

TEST_CASE("spec merging and hashing") {
  ExperimentSpec s = ExperimentSpec::defaults(ExperimentKind::SweepSavings);
  CHECK(s.scenario.num_users == 8);
  CHECK(s.l_values == std::vector<int>{10, 25});
  CHECK(s.seeds.size() == 20);
  const std::string h0 = config_hash(s);
  CHECK(h0.size() == 16);
  s.output_dir = "/somewhere/else";
  CHECK(config_hash(s) == h0);
  merge_spec_json(nlohmann::json{{"fractions", {0.5}}, {"scenario", {{"K", 4}}}}, s);
  CHECK(s.fractions == std::vector<double>{0.5});
  CHECK(s.scenario.num_users == 4);
  CHECK(s.l_values == std::vector<int>{10, 25});
  CHECK(config_hash(s) != h0);
  CHECK_THROWS_WITH(merge_spec_json(nlohmann::json{{"seeds", "x"}}, s), doctest::Contains("seeds"));
  s.fractions = {1.5};
  CHECK_THROWS_WITH(s.validate(), doctest::Contains("fractions"));
  ExperimentSpec r = ExperimentSpec::defaults(ExperimentKind::SweepRuntime);
  r.l_values = {50, 25};
  CHECK_THROWS_WITH(r.validate(), doctest::Contains("ascending"));
}

TEST_CASE("solve command") {
  SUBCASE("scalar fixture is feasible and matches the closed form") {
    ExperimentSpec s;
    s.statistics_file = kData + "/scalar_feasible.json";
    s.output_dir = fresh_dir("solve_ok").string();
    CHECK(cmd_solve(s) == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(fs::path(s.output_dir) / "result.json"));
    CHECK(j.at("x")[0].get<double>() == doctest::Approx(1.0).epsilon(1e-3));
    const std::string trace = slurp(fs::path(s.output_dir) / "trace.csv");
    CHECK(trace.rfind("# config-hash ", 0) == 0);
    CHECK(trace.find("penalty_iter,lambda,apg_iters,f_value,max_violation") != std::string::npos);
  }
  SUBCASE("target beyond the feasibility bound") {
    ExperimentSpec s;
    s.statistics_file = kData + "/scalar_infeasible.json";
    s.output_dir = fresh_dir("solve_bad").string();
    CHECK(cmd_solve(s) == 2);
  }
  SUBCASE("missing or malformed input") {
    ExperimentSpec s;
    s.statistics_file = kData + "/does_not_exist.json";
    s.output_dir = fresh_dir("solve_missing").string();
    CHECK_THROWS(cmd_solve(s));
    ExperimentSpec t;
    t.statistics_file = kData + "/scalar_feasible.json";
    t.se_targets = {-1.0};
    CHECK_THROWS_WITH(cmd_solve(t), doctest::Contains("se_targets"));
  }
  SUBCASE("exit codes through the CLI") {
    const std::string out = fresh_dir("cli").string();
    CHECK(run_cli("solve --statistics-file " + kData + "/scalar_feasible.json --out " + out) == 0);
    CHECK(run_cli("solve --statistics-file " + kData + "/scalar_infeasible.json --out " + out) == 2);
    CHECK(run_cli("solve --statistics-file " + kData + "/nope.json --out " + out) == 1);
    CHECK(run_cli("solve --spec " + kData + "/nope.json --out " + out) == 1);
    CHECK(run_cli("frobnicate") == 1);
  }
  SUBCASE("env var overrides the output directory") {
    const fs::path env_out = fresh_dir("env");
    const fs::path flag_out = fresh_dir("flag");
    const std::string cmd = "CFPA_OUTPUT_DIR=" + env_out.string() + " " + kCli +
                            " solve --statistics-file " + kData +
                            "/scalar_feasible.json --out " + flag_out.string() + " > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(env_out / "result.json"));
    CHECK_FALSE(fs::exists(flag_out / "result.json"));
  }
}

TEST_CASE("scenario command feeds solve") {
  ExperimentSpec s;
  s.kind = ExperimentKind::Scenario;
  s.scenario.num_aps = 4;
  s.scenario.num_users = 2;
  s.scenario.mc_realizations = 100;
  s.se_targets = {0.5};
  s.output_dir = fresh_dir("scenario").string();
  REQUIRE(cmd_scenario(s) == 0);
  const fs::path dir(s.output_dir);

  const Scenario loaded = scenario_from_json(nlohmann::json::parse(slurp(dir / "scenario.json")));
  const Scenario fresh = generate_scenario(s.scenario);
  CHECK(loaded.beta == fresh.beta);
  CHECK(loaded.ap_positions == fresh.ap_positions);
  const EffectiveStatistics a = build_statistics(loaded);
  const EffectiveStatistics b = build_statistics(fresh);
  CHECK(a.b == b.b);
  for (std::size_t i = 0; i < a.c.size(); ++i) CHECK(a.c[i] == b.c[i]);

  ExperimentSpec solve;
  solve.statistics_file = (dir / "statistics.json").string();
  solve.output_dir = (dir / "solve").string();
  fs::remove(dir / "scenario.json");
  CHECK(cmd_solve(solve) == 0);

  ExperimentSpec from_scenario;
  from_scenario.scenario_file = (dir / "missing.json").string();
  CHECK_THROWS(load_problem(from_scenario, false));
}

TEST_CASE("maxmin command") {
  ExperimentSpec s;
  s.statistics_file = kData + "/scalar_feasible.json";
  s.output_dir = fresh_dir("maxmin").string();
  CHECK(cmd_maxmin(s) == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp(fs::path(s.output_dir) / "maxmin.json"));
  CHECK(j.at("se").get<double>() == doctest::Approx(std::log2(1.5)).epsilon(0.02));
}

TEST_CASE("runtime sweep") {
  ExperimentSpec s = small_spec(ExperimentKind::SweepRuntime);
  s.l_values = {4, 8};
  s.output_dir = fresh_dir("runtime").string();
  REQUIRE(cmd_sweep_runtime(s) == 0);
  const std::string first = slurp(fs::path(s.output_dir) / "runtime.csv");
  CHECK(first.rfind("# config-hash " + config_hash(s) + "\n", 0) == 0);
  CHECK(first.find("L,seed,wall_ms,I_penalty,I_APG_total,objective_W,feasible\n") != std::string::npos);
  CHECK(first.find("# slope ") != std::string::npos);
  REQUIRE(cmd_sweep_runtime(s) == 0);
  const std::string second = slurp(fs::path(s.output_dir) / "runtime.csv");
  CHECK(without_timing(first) == without_timing(second));
  const RuntimeStudy st = sweep_runtime(s);
  CHECK(st.rows.size() == 4);
}

TEST_CASE("savings sweep") {
  ExperimentSpec s = small_spec(ExperimentKind::SweepSavings);
  s.l_values = {6};
  s.fractions = {0.2, 1.0};
  const SavingsStudy st = sweep_savings(s);
  CHECK(st.rows.size() + st.skipped.size() * 2 == 4);
  for (const auto& r : st.rows) {
    if (r.feasible_ideal && r.feasible_nl) {
      REQUIRE(r.saving.has_value());
      CHECK(*r.saving >= -1e-6);
    }
    CHECK(r.se_target == doctest::Approx(r.fraction * r.se_mm));
  }
  const std::string csv = savings_csv(st, s.bisection_tol, config_hash(s));
  CHECK(csv.find("L,seed,fraction,se_target,P_nl_of_ideal_opt,P_nl_of_nl_opt,saving") !=
        std::string::npos);
  s.output_dir = fresh_dir("savings").string();
  REQUIRE(cmd_sweep_savings(s) == 0);
  CHECK(slurp(fs::path(s.output_dir) / "savings.csv") == csv);
}

TEST_CASE("sparsity study") {
  ExperimentSpec s = ExperimentSpec::defaults(ExperimentKind::Sparsity);
  s.scenario.mc_realizations = 100;
  s.seeds = {1, 2, 3};
  const SparsityStudy st = sparsity_study(s);
  CHECK(st.counts.size() + st.skipped.size() == 3);
  CHECK(st.rows.size() == st.counts.size() * 15);
  for (std::size_t c = 0; c < st.counts.size(); ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < 15; ++i) {
      const SparsityRow& r = st.rows[c * 15 + i];
      CHECK(r.ptx_ideal_w <= 1.0 + 1e-9);
      CHECK(r.ptx_nl_w <= 1.0 + 1e-9);
      if (i > 0) CHECK(r.ptx_nl_w <= st.rows[c * 15 + i - 1].ptx_nl_w);
      total += r.ptx_nl_w;
    }
    CHECK(total > 0.0);
  }
  s.output_dir = fresh_dir("sparsity").string();
  REQUIRE(cmd_sparsity(s) == 0);
  CHECK(fs::exists(fs::path(s.output_dir) / "sparsity_counts.csv"));
}
