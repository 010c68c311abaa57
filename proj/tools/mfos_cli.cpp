#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "json.hpp"
#include "mfos/config.hpp"
#include "mfos/dynamics.hpp"
#include "mfos/examples.hpp"
#include "mfos/mollifier.hpp"
#include "mfos/obstacle_pde.hpp"
#include "mfos/residual.hpp"
#include "mfos/risk.hpp"
#include "mfos/rng.hpp"
#include "mfos/value_solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfos;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAcceptance = 3;
constexpr std::uint64_t kHoldoutTag = 0x401D;

// Residual classification tolerances, same as the acceptance run.
constexpr double kGenTol = 2e-2;
constexpr double kExerciseGap = 1e-3;
// Search value vs PDE oracle: max(2%, 3 stderr).
constexpr double kOracleRelTol = 0.02;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool quiet = false;
  std::string example = "standard";
  std::vector<int> criteria;
};

struct Run {
  ExperimentConfig cfg;
  fs::path out;
  bool quiet = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::string hash_hex() const {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << cfg.hash;
    return s.str();
  }
  json provenance() const { return {{"config_hash", hash_hex()}, {"seed", cfg.seed}, {"version", MFOS_VERSION}}; }
  std::string csv_header() const {
    return "# config_hash=" + hash_hex() + " seed=" + std::to_string(cfg.seed) + " version=" MFOS_VERSION "\n";
  }
  long long runtime_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  }
  void log(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }
};

// Write to a sibling temp file, then rename over the target.
void write_atomic(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

void write_json(const Run& run, const std::string& name, json j) {
  j.update(run.provenance());
  j["runtime_ms"] = run.runtime_ms();
  write_atomic(run.out / name, j.dump(2) + "\n");
  run.log("wrote " + (run.out / name).string());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

TimeGrid grid_of(const ExperimentConfig& c) { return TimeGrid::uniform(c.problem.horizon, c.steps); }

bool pde_applicable(const ExperimentConfig& c, const Problem& p) {
  return c.problem.d == 1 && !p.measure_dependent && c.problem.terminal.kind == TerminalSpec::Kind::expectation &&
         c.problem.running.kind == RunningSpec::Kind::zero;
}

std::function<double(double)> payoff_fn(const Payoff& psi) {
  return [psi](double x) { return psi(x); };
}

json policy_summary(const SolveResult& r, const TimeGrid& g) {
  return {{"value", r.estimate.value},
          {"stderr", r.estimate.mc_stderr},
          {"paths", r.estimate.n_paths},
          {"policy", to_json(r.policy)},
          {"grid", {{"t0", g.t0}, {"horizon", g.horizon}, {"steps", g.n}}},
          {"evaluations", r.evaluations},
          {"budget_exhausted", r.budget_exhausted}};
}

int cmd_simulate(const Run& run) {
  const auto& c = run.cfg;
  const Problem p = make_problem(c.problem);
  const TimeGrid g = grid_of(c);
  const Policy pol = c.policy ? *c.policy : Policy::never_stop(c.steps);
  const PathBundle b = simulate(c.measure, p, g, c.search.paths_per_atom, c.seed, pol.rule());

  std::ostringstream bin;
  write_path_bundle(bin, b, DumpTag{c.hash, MFOS_VERSION});
  write_atomic(run.out / "paths.bin", bin.str());

  const EmpiricalMeasure terminal = EmpiricalMeasure::from_atoms(c.problem.d, snapshot_atoms(b, g.n), 1e-9);
  std::ostringstream csv;
  csv << run.csv_header();
  write_measure_csv(csv, terminal);
  write_atomic(run.out / "terminal.csv", csv.str());

  json surv = json::array();
  for (int k = 0; k <= g.n; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < b.N; ++q) s += b.alive[static_cast<std::size_t>(k) * b.N + q];
    surv.push_back(s);
  }
  write_json(run, "simulate.json",
             {{"particles", b.N},
              {"steps", g.n},
              {"d", b.d},
              {"policy", to_json(pol)},
              {"objective", objective(b, b.alive, p)},
              {"stderr", bootstrap_stderr(b, b.alive, p, c.seed)},
              {"survivor_mass", surv}});
  return 0;
}

int cmd_solve(const Run& run) {
  const auto& c = run.cfg;
  const Problem p = make_problem(c.problem);
  const TimeGrid g = grid_of(c);
  const SolveResult r = solve_value(c.measure, p, g, c.search, c.seed);
  json j = policy_summary(r, g);
  if (!c.search.exact) {
    // Fresh paths: the in-sample value carries the search's selection bias.
    const ValueEstimate h =
        evaluate_policy(c.measure, p, g, r.policy, c.search.paths_per_atom, derive_seed(c.seed, kHoldoutTag));
    j["holdout"] = {{"value", h.value}, {"stderr", h.mc_stderr}};
  }
  if (pde_applicable(c, p)) {
    try {
      const auto psi = payoff_fn(c.problem.terminal.psi);
      const ObstaclePDEGrid pde = standard_os_pde(p, psi, c.pde);
      const double v = aggregate_value(c.measure.atoms(), 0.0, pde, psi);
      const double gap = std::abs(v - r.estimate.value);
      const double tol = std::max(kOracleRelTol * std::abs(v), 3.0 * r.estimate.mc_stderr);
      j["pde_oracle"] = {{"value", v}, {"abs_gap", gap}, {"tolerance", tol}, {"within_tolerance", gap <= tol}};
    } catch (const std::out_of_range& e) {
      run.log(std::string("pde oracle skipped: ") + e.what());
    }
  }
  write_json(run, "solve.json", std::move(j));
  if (!run.quiet) std::cout << fmt(r.estimate.value) << " +- " << fmt(r.estimate.mc_stderr) << '\n';
  return 0;
}

int cmd_verify_dpp(const Run& run) {
  const auto& c = run.cfg;
  const Problem p = make_problem(c.problem);
  const int s = c.dpp_split.value_or(std::max(1, c.steps / 2));
  const DppReport r = verify_dpp(c.measure, p, grid_of(c), s, c.search, c.seed);
  const bool within = r.residual <= 3.0 * r.combined_stderr;
  write_json(run, "dpp.json",
             {{"split", s},
              {"lhs", r.lhs},
              {"lhs_stderr", r.lhs_stderr},
              {"rhs", r.rhs},
              {"rhs_stderr", r.rhs_stderr},
              {"residual", r.residual},
              {"combined_stderr", r.combined_stderr},
              {"first_segment_candidates", r.first_segment_candidates},
              {"within_3_stderr", within}});
  if (!run.quiet) std::cout << "residual " << fmt(r.residual) << " vs 3se " << fmt(3.0 * r.combined_stderr) << '\n';
  return 0;
}

const char* region_name(Region r) {
  switch (r) {
    case Region::continuation: return "continuation";
    case Region::exercise: return "exercise";
    case Region::undetermined: return "undetermined";
  }
  return "?";
}

int cmd_residual(const Run& run) {
  const auto& c = run.cfg;
  const Problem p = make_problem(c.problem);
  ValueFunctional u;
  std::string source;
  std::shared_ptr<const ObstaclePDEGrid> pde;
  if (pde_applicable(c, p)) {
    const auto psi = payoff_fn(c.problem.terminal.psi);
    pde = std::make_shared<const ObstaclePDEGrid>(standard_os_pde(p, psi, c.pde));
    u = [pde, psi](double t, const EmpiricalMeasure& m) { return aggregate_value(m, t, *pde, psi, Interp::cubic); };
    source = "obstacle_pde";
  } else {
    const int ppa = c.search.paths_per_atom;
    const int steps = c.steps;
    const std::uint64_t seed = c.seed;
    u = [p, ppa, steps, seed](double t, const EmpiricalMeasure& m) {
      const PathBundle b = simulate_unstopped(m, p, TimeGrid(t, p.horizon, steps), ppa, seed, Exec::serial);
      return objective(b, b.alive, p);
    };
    source = "unstopped_simulation";
  }
  ResidualConfig rc = c.residual;
  rc.seed = c.seed;
  const ResidualReport r = obstacle_residual(u, c.residual_t, c.measure, p, rc);
  json j = {{"t", c.residual_t},
            {"value_source", source},
            {"interior_term", r.interior_term},
            {"d_i_min", r.d_i_min ? json(*r.d_i_min) : json(nullptr)},
            {"residual", r.residual},
            {"admissible_maps", r.admissible},
            {"region", region_name(classify(r, kGenTol, kExerciseGap))},
            {"tolerances", {{"generator", kGenTol}, {"exercise_gap", kExerciseGap}}}};
  write_json(run, "residual.json", std::move(j));
  if (!run.quiet) std::cout << "residual " << fmt(r.residual) << '\n';
  return 0;
}

int cmd_mollify(const Run& run) {
  const auto& c = run.cfg;
  if (c.measure.dim() != 1) throw ConfigError("measure", "mollify needs a 1-d measure");
  const MeasureFunctional u = builtin_functional(c.mollify.functional);
  const double base = u(c.measure);
  std::ostringstream csv;
  csv << run.csv_header() << "n,U_n,stderr,gap\n";
  for (int n : c.mollify.ns) {
    MollifierParams mp;
    mp.n = n;
    mp.z_samples = c.mollify.z_samples;
    const MollifiedValue v = mollify(u, c.measure, mp, c.seed);
    csv << n << ',' << fmt(v.value) << ',' << fmt(v.stderr_) << ',' << fmt(std::abs(v.value - base)) << '\n';
  }
  write_atomic(run.out / "mollify.csv", csv.str());
  run.log("wrote " + (run.out / "mollify.csv").string());
  return 0;
}

struct ExampleRow {
  double parameter, value, oracle, stderr_;
};

Problem dynamics_only(const ExperimentConfig& c) {
  ProblemSpec s = c.problem;
  s.terminal = TerminalSpec{};
  s.running = RunningSpec{};
  Problem p = make_problem(s);
  if (p.d != 1 || p.measure_dependent) throw ConfigError("problem", "examples need 1-d measure-independent dynamics");
  return p;
}

int cmd_example(const Run& run, const std::string& which) {
  const auto& c = run.cfg;
  const TimeGrid g = grid_of(c);
  std::vector<ExampleRow> rows;
  std::string param_name;
  if (which == "standard") {
    const Payoff& psi0 = c.problem.terminal.psi;
    if (psi0.kind != Payoff::Kind::put || c.problem.terminal.kind != TerminalSpec::Kind::expectation) {
      throw ConfigError("problem.terminal", "standard example needs an expected put payoff");
    }
    param_name = "strike";
    for (double k : {psi0.strike - 0.5, psi0.strike, psi0.strike + 0.5}) {
      ProblemSpec s = c.problem;
      s.terminal.psi = Payoff::put(k);
      const Problem p = make_problem(s);
      const auto psi = payoff_fn(s.terminal.psi);
      const SolveResult r = solve_value(c.measure, p, g, c.search, c.seed);
      const double oracle = aggregate_value(c.measure.atoms(), 0.0, standard_os_pde(p, psi, c.pde), psi);
      rows.push_back({k, r.estimate.value, oracle, r.estimate.mc_stderr});
    }
  } else if (which == "meanvar") {
    const Problem dyn = dynamics_only(c);
    param_name = "lambda";
    for (double lam : {0.5 * c.example.lambda, c.example.lambda, 2.0 * c.example.lambda}) {
      ProblemSpec s = c.problem;
      s.terminal = TerminalSpec{};
      s.terminal.kind = TerminalSpec::Kind::mean_variance;
      s.terminal.lambda = lam;
      s.running = RunningSpec{};
      const SolveResult r = solve_value(c.measure, make_problem(s), g, c.search, c.seed);
      const DualResult d = mean_variance_dual(c.measure, dyn, lam, c.example.alpha_grid, c.pde);
      rows.push_back({lam, r.estimate.value, d.value, r.estimate.mc_stderr});
    }
  } else if (which == "es") {
    const Problem dyn = dynamics_only(c);
    param_name = "alpha";
    const double a = c.example.alpha;
    for (double alpha : {0.5 * a, a, 0.5 * (a + 1.0)}) {
      const EsResult r = expected_shortfall_value(c.measure, dyn, alpha, c.example.beta_search, c.pde);
      // Stopping now is optimal for driftless dynamics; otherwise a lower bound.
      rows.push_back({alpha, r.value, expected_shortfall(c.measure.atoms(), alpha), 0.0});
    }
  } else if (which == "distortion") {
    param_name = "phi_param";
    const Distortion base = c.example.phi;
    std::vector<double> params{base.param};
    if (base.kind == Distortion::Kind::power) params = {0.5 * base.param, base.param, 0.5 * (base.param + 1.0)};
    if (base.kind == Distortion::Kind::exponential) params = {0.5 * base.param, base.param, 2.0 * base.param};
    for (double q : params) {
      Distortion phi = base;
      phi.param = q;
      rows.push_back({q, distortion_g(c.measure.atoms(), phi, c.example.psi),
                      distortion_g_quadrature(c.measure.atoms(), phi, c.example.psi), 0.0});
    }
  } else {
    throw ConfigError("example", "unknown example '" + which + "'");
  }
  std::ostringstream csv;
  csv << run.csv_header() << "# example=" << which << " parameter=" << param_name << '\n';
  csv << "parameter,value,oracle_value,abs_gap,stderr\n";
  for (const ExampleRow& r : rows) {
    csv << fmt(r.parameter) << ',' << fmt(r.value) << ',' << fmt(r.oracle) << ',' << fmt(std::abs(r.value - r.oracle))
        << ',' << fmt(r.stderr_) << '\n';
  }
  const fs::path path = run.out / ("example_" + which + ".csv");
  write_atomic(path, csv.str());
  run.log("wrote " + path.string());
  return 0;
}

int cmd_acceptance(const Options& o) {
  const auto results = acceptance::run(std::cout, o.criteria);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.pass();
  return ok ? 0 : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field optimal stopping toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config,-c", o.config, "experiment JSON");
  app.add_option("--seed", o.seed, "override the config seed");
  app.add_option("--out,-o", o.out, "output directory (default: config 'out')");
  app.add_option("--threads", o.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet,-q", o.quiet, "suppress progress output");

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {{"simulate", "simulate particles under the configured policy"},
                      {"solve", "search the policy family for the value"},
                      {"verify-dpp", "compare the value with its two-stage decomposition"},
                      {"residual", "evaluate the obstacle residual at (t, m)"},
                      {"mollify", "mollified values of a test functional"}};
  std::vector<CLI::App*> cmds;
  for (const Sub& s : subs) cmds.push_back(app.add_subcommand(s.name, s.help));
  CLI::App* ex = app.add_subcommand("example", "closed-form examples against their oracles");
  ex->add_option("kind", o.example, "standard | meanvar | es | distortion")
      ->check(CLI::IsMember({"standard", "meanvar", "es", "distortion"}));
  CLI::App* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
  acc->add_option("criteria", o.criteria, "criterion ids (default: all)");

  CLI11_PARSE(app, argc, argv);
  if (o.threads > 0) omp_set_num_threads(o.threads);

  try {
    if (acc->parsed()) return cmd_acceptance(o);
    if (o.config.empty()) throw ConfigError("--config", "required for this command");
    Run run;
    run.quiet = o.quiet;
    run.cfg = load_config(o.config);
    if (o.seed) run.cfg.seed = *o.seed;
    run.out = o.out.empty() ? fs::path(run.cfg.out_dir) : fs::path(o.out);
    if (ex->parsed()) return cmd_example(run, o.example);
    const std::function<int(const Run&)> handlers[] = {cmd_simulate, cmd_solve, cmd_verify_dpp, cmd_residual,
                                                       cmd_mollify};
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      if (cmds[k]->parsed()) return handlers[k](run);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error in " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
