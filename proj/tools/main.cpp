#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cfpa/experiments.hpp"

namespace {

constexpr const char* kOutputEnv = "CFPA_OUTPUT_DIR";

// Flags left unset keep the value from the spec file or the study defaults.
struct Flags {
  std::optional<std::string> spec_file;
  std::optional<std::string> out;
  std::optional<std::string> scenario_file;
  std::optional<std::string> statistics_file;
  std::optional<int> aps;
  std::optional<int> users;
  std::optional<int> antennas;
  std::optional<double> area;
  std::optional<int> mc;
  std::optional<std::uint64_t> seed;
  std::vector<int> l_values;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  std::vector<double> se_targets;
  std::optional<double> se_target;
  std::optional<double> bisection_tol;
  std::optional<std::string> model;
  std::optional<double> epsilon;
  std::optional<double> eps_feas;
  std::optional<double> lambda0;
  std::optional<double> zeta;
  std::optional<double> mu_s;
  std::optional<int> max_penalty_iters;
  std::optional<int> max_apg_iters;
};

void add_flags(CLI::App* app, Flags& f, cfpa::ExperimentKind kind) {
  using K = cfpa::ExperimentKind;
  app->add_option("--spec", f.spec_file, "JSON experiment spec");
  app->add_option("--out", f.out, std::string("Output directory (env ") + kOutputEnv + " wins)");
  app->add_option("--L", f.aps, "Number of APs");
  app->add_option("--K", f.users, "Number of users");
  app->add_option("--N", f.antennas, "Antennas per AP");
  app->add_option("--area", f.area, "Side of the square area in meters");
  app->add_option("--mc", f.mc, "Monte-Carlo realizations");
  app->add_option("--seed", f.seed, "Scenario seed");
  app->add_option("--model", f.model, "ideal | non-linear");
  app->add_option("--epsilon", f.epsilon, "Inner relative-decrease exit");
  app->add_option("--eps-feas", f.eps_feas, "Feasibility tolerance");
  app->add_option("--lambda0", f.lambda0);
  app->add_option("--zeta", f.zeta);
  app->add_option("--mu-s", f.mu_s);
  app->add_option("--max-penalty-iters", f.max_penalty_iters);
  app->add_option("--max-apg-iters", f.max_apg_iters);
  if (kind == K::Solve || kind == K::MaxMin) {
    app->add_option("--scenario-file", f.scenario_file, "Scenario JSON")->check(CLI::ExistingFile);
    app->add_option("--statistics-file", f.statistics_file, "Statistics JSON")
        ->check(CLI::ExistingFile);
  }
  if (kind == K::Solve || kind == K::Scenario) {
    app->add_option("--se", f.se_targets, "SE targets in bits/s/Hz (1 or K values)");
  }
  if (kind == K::SweepRuntime || kind == K::SweepSavings || kind == K::Sparsity) {
    app->add_option("--L-list", f.l_values, "AP counts");
    app->add_option("--seeds", f.seeds, "Scenario seeds");
  }
  if (kind == K::SweepRuntime || kind == K::Sparsity) {
    app->add_option("--target-se", f.se_target, "Common SE target in bits/s/Hz");
  }
  if (kind == K::SweepSavings) app->add_option("--fractions", f.fractions, "Fractions of SE_mm");
  if (kind == K::SweepSavings || kind == K::MaxMin) {
    app->add_option("--bisection-tol", f.bisection_tol, "Max-min bisection tolerance");
  }
}

nlohmann::json load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open spec '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("spec '" + path + "' is not valid JSON: " + e.what());
  }
}

cfpa::ExperimentSpec build_spec(cfpa::ExperimentKind kind, const Flags& f) {
  cfpa::ExperimentSpec s = cfpa::ExperimentSpec::defaults(kind);
  if (f.spec_file) {
    const nlohmann::json j = load_spec_file(*f.spec_file);
    cfpa::merge_spec_json(j, s);
    s.kind = kind;
  }
  auto set = [](const auto& opt, auto& target) {
    if (opt) target = *opt;
  };
  set(f.scenario_file, s.scenario_file);
  set(f.statistics_file, s.statistics_file);
  set(f.aps, s.scenario.num_aps);
  set(f.users, s.scenario.num_users);
  set(f.antennas, s.scenario.antennas_per_ap);
  set(f.area, s.scenario.area_side);
  set(f.mc, s.scenario.mc_realizations);
  set(f.seed, s.scenario.seed);
  if (f.model) s.solver.model = cfpa::parse_power_model(*f.model);
  set(f.epsilon, s.solver.epsilon);
  set(f.eps_feas, s.solver.eps_feas);
  set(f.lambda0, s.solver.lambda0);
  set(f.zeta, s.solver.zeta);
  set(f.mu_s, s.solver.mu_s);
  set(f.max_penalty_iters, s.solver.max_penalty_iters);
  set(f.max_apg_iters, s.solver.max_apg_iters);
  set(f.se_target, s.se_target);
  set(f.bisection_tol, s.bisection_tol);
  if (!f.l_values.empty()) s.l_values = f.l_values;
  if (!f.fractions.empty()) s.fractions = f.fractions;
  if (!f.seeds.empty()) s.seeds = f.seeds;
  if (!f.se_targets.empty()) s.se_targets = f.se_targets;
  set(f.out, s.output_dir);
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') {
    s.output_dir = env;
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  using K = cfpa::ExperimentKind;
  CLI::App app{"Power allocation for cell-free massive MIMO with non-linear amplifiers"};
  app.require_subcommand(1);

  struct Sub {
    K kind;
    const char* help;
    CLI::App* app = nullptr;
    Flags flags;
  };
  std::vector<Sub> subs = {
      {K::Scenario, "Draw a scenario; write scenario.json and statistics.json", nullptr, {}},
      {K::Solve, "Solve one instance; write result.json and trace.csv", nullptr, {}},
      {K::SweepRuntime, "Solve time against the number of APs; write runtime.csv", nullptr, {}},
      {K::SweepSavings, "Savings of the non-linear objective; write savings.csv", nullptr, {}},
      {K::Sparsity, "Per-AP transmit power under both objectives; write sparsity.csv", nullptr, {}},
      {K::MaxMin, "Largest common SE; write maxmin.json", nullptr, {}},
  };
  for (auto& s : subs) {
    s.app = app.add_subcommand(cfpa::to_string(s.kind), s.help);
    add_flags(s.app, s.flags, s.kind);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      const cfpa::ExperimentSpec spec = build_spec(s.kind, s.flags);
      const int code = cfpa::run_experiment(spec);
      if (code == 2) std::cerr << "infeasible: at least one SINR target is not met\n";
      return code;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
