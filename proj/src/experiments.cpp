#include "cfpa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cfpa/json_fields.hpp"

namespace cfpa {
namespace {

namespace fs = std::filesystem;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

fs::path prepare_output(const ExperimentSpec& spec) {
  fs::path dir(spec.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("output directory '" + spec.output_dir + "' is not writable");
  }
  return dir;
}

std::ostringstream csv_stream(const std::string& hash) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "# config-hash " << hash << '\n';
  return os;
}

std::string fmt_optional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

SolverOptions with_model(SolverOptions o, PowerModel model) {
  o.model = model;
  return o;
}

// Catches per-point failures so one bad draw does not abort a sweep.
template <class F>
bool guarded(std::vector<std::string>& skipped, const std::string& label, F&& f) {
  try {
    f();
    return true;
  } catch (const std::exception& e) {
    skipped.push_back(label + ": " + e.what());
    std::cerr << "skipping " << label << ": " << e.what() << '\n';
    return false;
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Scenario: return "scenario";
    case ExperimentKind::Solve: return "solve";
    case ExperimentKind::SweepRuntime: return "sweep-runtime";
    case ExperimentKind::SweepSavings: return "sweep-savings";
    case ExperimentKind::Sparsity: return "sparsity";
    case ExperimentKind::MaxMin: return "maxmin";
  }
  return "solve";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Scenario, ExperimentKind::Solve, ExperimentKind::SweepRuntime,
                 ExperimentKind::SweepSavings, ExperimentKind::Sparsity, ExperimentKind::MaxMin}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

ExperimentSpec ExperimentSpec::defaults(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  std::vector<std::uint64_t> twenty(20);
  std::iota(twenty.begin(), twenty.end(), std::uint64_t{1});
  switch (kind) {
    case ExperimentKind::SweepRuntime:
      s.scenario.num_users = 15;
      s.l_values = {25, 50, 100};
      s.seeds = {1, 2, 3, 4, 5};
      s.se_target = 1.0;
      break;
    case ExperimentKind::SweepSavings:
      s.scenario.num_users = 8;
      s.l_values = {10, 25};
      s.fractions = {0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
      s.seeds = twenty;
      break;
    case ExperimentKind::Sparsity:
      s.scenario.num_users = 5;
      s.scenario.area_side = 200.0;
      s.l_values = {15};
      s.seeds = twenty;
      s.se_target = 6.0;
      break;
    default:
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid experiment spec: " + what);
  };
  solver.validate();
  require(bisection_tol > 0.0, "field 'bisection_tol' must be > 0");
  require(se_target > 0.0, "field 'se_target' must be > 0");
  for (double t : se_targets) require(t > 0.0 && std::isfinite(t), "field 'se_targets' must be > 0");
  const bool sweep = kind == ExperimentKind::SweepRuntime || kind == ExperimentKind::SweepSavings ||
                     kind == ExperimentKind::Sparsity;
  if (sweep) {
    require(!l_values.empty(), "field 'l_values' must be non-empty");
    require(!seeds.empty(), "field 'seeds' must be non-empty");
    for (int l : l_values) require(l >= 1, "field 'l_values' entries must be >= 1");
  }
  if (kind == ExperimentKind::SweepRuntime) {
    require(std::is_sorted(l_values.begin(), l_values.end()), "field 'l_values' must be ascending");
  }
  if (kind == ExperimentKind::SweepSavings) {
    require(!fractions.empty(), "field 'fractions' must be non-empty");
    for (double f : fractions) require(f > 0.0 && f <= 1.0, "field 'fractions' must lie in (0, 1]");
  }
  if (!statistics_file && !scenario_file) {
    ScenarioConfig c = scenario;
    if (sweep) c.num_aps = l_values.front();
    c.validate();
  }
}

void merge_spec_json(const nlohmann::json& j, ExperimentSpec& spec) {
  if (!j.is_object()) throw std::invalid_argument("spec must be a JSON object");
  if (j.contains("kind")) spec.kind = parse_experiment_kind(read_required<std::string>(j, "kind"));
  if (j.contains("scenario")) {
    const auto& sc = j.at("scenario");
    if (!sc.is_object()) throw std::invalid_argument("malformed field 'scenario'");
    from_json(sc, spec.scenario);
  }
  if (j.contains("scenario_file")) spec.scenario_file = read_required<std::string>(j, "scenario_file");
  if (j.contains("statistics_file")) {
    spec.statistics_file = read_required<std::string>(j, "statistics_file");
  }
  if (j.contains("solver")) {
    const auto& so = j.at("solver");
    if (!so.is_object()) throw std::invalid_argument("malformed field 'solver'");
    from_json(so, spec.solver);
  }
  read_optional(j, "se_targets", spec.se_targets);
  read_optional(j, "l_values", spec.l_values);
  read_optional(j, "fractions", spec.fractions);
  read_optional(j, "seeds", spec.seeds);
  read_optional(j, "se_target", spec.se_target);
  read_optional(j, "bisection_tol", spec.bisection_tol);
  read_optional(j, "output_dir", spec.output_dir);
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j{{"kind", to_string(spec.kind)},
                   {"scenario", spec.scenario},
                   {"solver", spec.solver},
                   {"se_targets", spec.se_targets},
                   {"l_values", spec.l_values},
                   {"fractions", spec.fractions},
                   {"seeds", spec.seeds},
                   {"se_target", spec.se_target},
                   {"bisection_tol", spec.bisection_tol}};
  if (spec.scenario_file) j["scenario_file"] = *spec.scenario_file;
  if (spec.statistics_file) j["statistics_file"] = *spec.statistics_file;
  return j;
}

std::string config_hash(const ExperimentSpec& spec) {
  const std::string text = spec_to_json(spec).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PowerParams power_params(const ScenarioConfig& config) {
  return PowerParams{config.p_max, config.eta_max, config.eta_ideal};
}

ScenarioConfig point_config(const ExperimentSpec& spec, int num_aps, std::uint64_t seed) {
  ScenarioConfig c = spec.scenario;
  c.num_aps = num_aps;
  c.seed = seed;
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

RuntimeStudy sweep_runtime(const ExperimentSpec& spec) {
  spec.validate();
  RuntimeStudy study;
  std::vector<std::string> skipped;
  for (int L : spec.l_values) {
    std::vector<double> times;
    for (std::uint64_t seed : spec.seeds) {
      const std::string label = "L=" + std::to_string(L) + " seed=" + std::to_string(seed);
      guarded(skipped, label, [&] {
        const ScenarioConfig cfg = point_config(spec, L, seed);
        const EffectiveStatistics stats = build_statistics(generate_scenario(cfg));
        const ProblemData data =
            assemble(stats, power_params(cfg), Targets::se({spec.se_target}));
        const SolverResult r = penalty_minimize(data, spec.solver);
        RuntimeRow row{L,
                       seed,
                       r.wall_time_s * 1e3,
                       r.penalty_iters,
                       r.apg_iters_total,
                       r.model == PowerModel::Ideal ? r.consumed_ideal : r.consumed_nonlinear,
                       r.feasible};
        if (r.feasible) times.push_back(row.wall_ms);
        study.rows.push_back(row);
      });
    }
    if (!times.empty()) {
      study.fit_l.push_back(L);
      study.median_ms.push_back(median(times));
    }
  }
  std::vector<double> lx(study.fit_l.begin(), study.fit_l.end());
  study.slope = log_log_slope(lx, study.median_ms);
  return study;
}

SavingsStudy sweep_savings(const ExperimentSpec& spec) {
  spec.validate();
  SavingsStudy study;
  for (int L : spec.l_values) {
    for (std::uint64_t seed : spec.seeds) {
      const std::string label = "L=" + std::to_string(L) + " seed=" + std::to_string(seed);
      std::vector<SavingsRow> group;
      const bool ok = guarded(study.skipped, label, [&] {
        const ScenarioConfig cfg = point_config(spec, L, seed);
        const EffectiveStatistics stats = build_statistics(generate_scenario(cfg));
        const ProblemData base = assemble(stats, power_params(cfg), std::nullopt);
        const MaxMinReport mm = max_min_sinr(base, spec.solver, spec.bisection_tol);
        if (!mm.se) throw std::runtime_error("max-min bisection was inconclusive");
        if (!(*mm.se > 0.0)) throw std::runtime_error("max-min SE is zero");
        for (double f : spec.fractions) {
          const double se = f * *mm.se;
          const ProblemData data = with_common_target(base, se_to_sinr(se));
          const SolverResult ri = penalty_minimize(data, with_model(spec.solver, PowerModel::Ideal));
          const SolverResult rn =
              penalty_minimize(data, with_model(spec.solver, PowerModel::NonLinear));
          SavingsRow row;
          row.num_aps = L;
          row.seed = seed;
          row.fraction = f;
          row.se_mm = *mm.se;
          row.se_target = se;
          row.p_nl_of_ideal_opt = ri.consumed_nonlinear;
          row.p_nl_of_nl_opt = rn.consumed_nonlinear;
          row.saving = relative_saving(ri.x, rn.x, data);
          row.feasible_ideal = ri.feasible;
          row.feasible_nl = rn.feasible;
          group.push_back(row);
        }
      });
      if (ok) study.rows.insert(study.rows.end(), group.begin(), group.end());
    }
  }
  return study;
}

SparsityStudy sparsity_study(const ExperimentSpec& spec) {
  spec.validate();
  SparsityStudy study;
  const int L = spec.l_values.front();
  for (std::uint64_t seed : spec.seeds) {
    const std::string label = "seed=" + std::to_string(seed);
    guarded(study.skipped, label, [&] {
      const ScenarioConfig cfg = point_config(spec, L, seed);
      const EffectiveStatistics stats = build_statistics(generate_scenario(cfg));
      const ProblemData data = assemble(stats, power_params(cfg), Targets::se({spec.se_target}));
      const SolverResult ri = penalty_minimize(data, with_model(spec.solver, PowerModel::Ideal));
      const SolverResult rn = penalty_minimize(data, with_model(spec.solver, PowerModel::NonLinear));
      if (!ri.feasible || !rn.feasible) {
        throw std::runtime_error(std::string("infeasible under the ") +
                                 (ri.feasible ? "non-linear" : "ideal") + " objective");
      }
      std::vector<int> order(static_cast<std::size_t>(L));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return rn.per_ap_tx(a) > rn.per_ap_tx(b); });
      for (int l : order) study.rows.push_back({seed, l, ri.per_ap_tx(l), rn.per_ap_tx(l)});
      const double off = kOffThreshold * data.p_max;
      SparsityCount c{seed, 0, 0};
      for (int l = 0; l < L; ++l) {
        c.off_ideal += ri.per_ap_tx(l) < off ? 1 : 0;
        c.off_nl += rn.per_ap_tx(l) < off ? 1 : 0;
      }
      study.counts.push_back(c);
    });
  }
  return study;
}

std::string runtime_csv(const RuntimeStudy& study, const std::string& hash) {
  auto os = csv_stream(hash);
  os << "L,seed,wall_ms,I_penalty,I_APG_total,objective_W,feasible\n";
  for (const auto& r : study.rows) {
    os << r.num_aps << ',' << r.seed << ',' << r.wall_ms << ',' << r.penalty_iters << ','
       << r.apg_iters_total << ',' << r.objective_w << ',' << (r.feasible ? 1 : 0) << '\n';
  }
  for (std::size_t i = 0; i < study.fit_l.size(); ++i) {
    os << "# median L=" << study.fit_l[i] << " wall_ms=" << study.median_ms[i] << '\n';
  }
  os << "# slope " << fmt_optional(study.slope) << '\n';
  return os.str();
}

std::string savings_csv(const SavingsStudy& study, double bisection_tol, const std::string& hash) {
  auto os = csv_stream(hash);
  os << "L,seed,fraction,se_target,P_nl_of_ideal_opt,P_nl_of_nl_opt,saving,se_mm,"
        "feasible_ideal,feasible_nl,bisection_tol\n";
  for (const auto& r : study.rows) {
    os << r.num_aps << ',' << r.seed << ',' << r.fraction << ',' << r.se_target << ','
       << r.p_nl_of_ideal_opt << ',' << r.p_nl_of_nl_opt << ',' << fmt_optional(r.saving) << ','
       << r.se_mm << ',' << (r.feasible_ideal ? 1 : 0) << ',' << (r.feasible_nl ? 1 : 0) << ','
       << bisection_tol << '\n';
  }
  for (const auto& s : study.skipped) os << "# skipped " << s << '\n';
  return os.str();
}

std::string sparsity_csv(const SparsityStudy& study, const std::string& hash) {
  auto os = csv_stream(hash);
  os << "seed,ap_index,ptx_ideal_W,ptx_nl_W\n";
  for (const auto& r : study.rows) {
    os << r.seed << ',' << r.ap_index << ',' << r.ptx_ideal_w << ',' << r.ptx_nl_w << '\n';
  }
  for (const auto& s : study.skipped) os << "# skipped " << s << '\n';
  return os.str();
}

std::string sparsity_counts_csv(const SparsityStudy& study, const std::string& hash) {
  auto os = csv_stream(hash);
  os << "seed,off_ideal,off_nl\n";
  for (const auto& c : study.counts) os << c.seed << ',' << c.off_ideal << ',' << c.off_nl << '\n';
  return os.str();
}

ProblemData load_problem(const ExperimentSpec& spec, bool require_targets) {
  std::optional<Targets> targets;
  if (!spec.se_targets.empty()) targets = Targets::se(spec.se_targets);
  ProblemData data;
  if (spec.statistics_file) {
    nlohmann::json j = read_json_file(*spec.statistics_file);
    if (targets) j["se_targets"] = spec.se_targets;
    data = problem_from_json(j);
  } else {
    ScenarioConfig cfg = spec.scenario;
    Scenario sc;
    if (spec.scenario_file) {
      sc = scenario_from_json(read_json_file(*spec.scenario_file));
      cfg = sc.config;
    } else {
      sc = generate_scenario(cfg);
    }
    data = assemble(build_statistics(sc), power_params(cfg), targets);
  }
  if (require_targets && !data.has_targets()) {
    throw std::invalid_argument("missing field 'se_targets'");
  }
  return data;
}

int cmd_scenario(const ExperimentSpec& spec) {
  spec.validate();
  const fs::path dir = prepare_output(spec);
  const Scenario sc = generate_scenario(spec.scenario);
  const EffectiveStatistics stats = build_statistics(sc);
  write_text(dir / "scenario.json", scenario_to_json(sc).dump(2) + "\n");
  write_text(dir / "statistics.json",
             problem_inputs_to_json(stats, power_params(spec.scenario), spec.se_targets).dump(2) +
                 "\n");
  return 0;
}

int cmd_solve(const ExperimentSpec& spec) {
  spec.validate();
  const fs::path dir = prepare_output(spec);
  const ProblemData data = load_problem(spec, true);
  SolverOptions opts = spec.solver;
  opts.record_history = false;
  const SolverResult r = penalty_minimize(data, opts);
  nlohmann::json j = result_to_json(r);
  j["config_hash"] = config_hash(spec);
  write_text(dir / "result.json", j.dump(2) + "\n");
  write_text(dir / "trace.csv", "# config-hash " + config_hash(spec) + "\n" + trace_to_csv(r));
  return r.feasible ? 0 : 2;
}

int cmd_sweep_runtime(const ExperimentSpec& spec) {
  const fs::path dir = prepare_output(spec);
  const RuntimeStudy study = sweep_runtime(spec);
  write_text(dir / "runtime.csv", runtime_csv(study, config_hash(spec)));
  return 0;
}

int cmd_sweep_savings(const ExperimentSpec& spec) {
  const fs::path dir = prepare_output(spec);
  const SavingsStudy study = sweep_savings(spec);
  write_text(dir / "savings.csv", savings_csv(study, spec.bisection_tol, config_hash(spec)));
  return 0;
}

int cmd_sparsity(const ExperimentSpec& spec) {
  const fs::path dir = prepare_output(spec);
  const SparsityStudy study = sparsity_study(spec);
  const std::string hash = config_hash(spec);
  write_text(dir / "sparsity.csv", sparsity_csv(study, hash));
  write_text(dir / "sparsity_counts.csv", sparsity_counts_csv(study, hash));
  return 0;
}

int cmd_maxmin(const ExperimentSpec& spec) {
  spec.validate();
  const fs::path dir = prepare_output(spec);
  const ProblemData data = load_problem(spec, false);
  const MaxMinReport r = max_min_sinr(data, spec.solver, spec.bisection_tol);
  nlohmann::json j{{"gamma", r.gamma ? nlohmann::json(*r.gamma) : nlohmann::json()},
                   {"se", r.se ? nlohmann::json(*r.se) : nlohmann::json()},
                   {"se_lower", r.se_lower},
                   {"se_upper", r.se_upper},
                   {"probes", r.probes},
                   {"conclusive", r.conclusive},
                   {"bisection_tol", r.bisection_tol},
                   {"config_hash", config_hash(spec)}};
  write_text(dir / "maxmin.json", j.dump(2) + "\n");
  return r.conclusive ? 0 : 1;
}

int run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::Scenario: return cmd_scenario(spec);
    case ExperimentKind::Solve: return cmd_solve(spec);
    case ExperimentKind::SweepRuntime: return cmd_sweep_runtime(spec);
    case ExperimentKind::SweepSavings: return cmd_sweep_savings(spec);
    case ExperimentKind::Sparsity: return cmd_sparsity(spec);
    case ExperimentKind::MaxMin: return cmd_maxmin(spec);
  }
  return 1;
}

}  // namespace cfpa
