#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mfos/dynamics.hpp"
#include "mfos/examples.hpp"
#include "mfos/measure.hpp"
#include "mfos/mollifier.hpp"
#include "mfos/obstacle_pde.hpp"
#include "mfos/policy.hpp"
#include "mfos/problem.hpp"
#include "mfos/residual.hpp"
#include "mfos/rng.hpp"
#include "mfos/risk.hpp"
#include "mfos/transport.hpp"
#include "mfos/value_solver.hpp"

namespace mfos::acceptance {
namespace {

// Tolerances.
constexpr double kRelTol = 0.02;
constexpr double kSigmas = 3.0;
constexpr double kPdeRelTol = 5e-3;
constexpr double kExact = 1e-12;
constexpr double kRuTol = 1e-10;
constexpr double kLipSlack = 1e-9;
constexpr double kGenTol = 5e-2;
constexpr double kResidualGenTol = 2e-2;
constexpr double kExerciseGap = 1e-3;
constexpr double kClassifyRate = 0.9;

struct Detail {
  std::ostringstream s;
  bool ok = true;
  void check(bool cond, const std::string& what) {
    ok = ok && cond;
    s << (s.tellp() > 0 ? "; " : "") << what << (cond ? "" : " [x]");
  }
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

bool agree(double a, double b, double se) {
  return std::abs(a - b) <= std::max(kRelTol * std::max(std::abs(a), std::abs(b)), kSigmas * se);
}

const Payoff kPut = Payoff::put(1.0);

Problem put_problem() { return make_problem(standard_put_spec(1.0, 1.0, 1.0)); }

EmpiricalMeasure four_atom_mixed() {
  const double xs[] = {-0.5, 0.4, 1.5, 0.8};
  const int fl[] = {1, 1, 1, 0};
  const double w[] = {0.3, 0.3, 0.2, 0.2};
  return make_empirical_1d(xs, fl, w);
}

SearchConfig put_search() {
  SearchConfig cfg;
  cfg.paths_per_atom = 2000;
  cfg.coarse_points = 9;
  cfg.tol = 1e-2;
  cfg.max_evals = 200;
  return cfg;
}

ProblemSpec mean_variance_spec(double drift, double lambda) {
  ProblemSpec s;
  s.drift = constant_drift(drift);
  s.vol = constant_vol(1.0);
  s.terminal.kind = TerminalSpec::Kind::mean_variance;
  s.terminal.lambda = lambda;
  s.label = "mean_variance";
  return s;
}

CriterionResult c1() {
  Detail d;
  const Problem p = put_problem();
  const EmpiricalMeasure m = four_atom_mixed();
  const ObstaclePDEGrid pde = standard_os_pde(p, kPut, PdeConfig{});
  const double oracle = aggregate_value(m, 0.0, pde, kPut);
  const SolveResult r = solve_value(m, p, TimeGrid::uniform(1.0, 20), put_search(), 101);
  d.check(agree(r.estimate.value, oracle, r.estimate.mc_stderr),
          "solve " + fmt(r.estimate.value) + " +- " + fmt(r.estimate.mc_stderr) + " vs PDE " + fmt(oracle));
  double worst = 0.0;
  for (double t : {0.0, 0.5}) {
    for (double x = -1.0; x <= 2.5 + 1e-9; x += 0.05) {
      const double exact = bachelier_put(x, 1.0, 1.0, 1.0 - t);
      worst = std::max(worst, std::abs(pde.value(t, x) - exact) / exact);
    }
  }
  d.check(worst <= kPdeRelTol, "PDE vs closed form worst rel err " + fmt(worst));
  return {1, "aggregation identity", d.ok, d.s.str(), 0, 120};
}

CriterionResult c2() {
  Detail d;
  const Problem p = put_problem();
  const DppReport r = verify_dpp(four_atom_mixed(), p, TimeGrid::uniform(1.0, 20), 10, put_search(), 202);
  d.check(r.residual <= kSigmas * r.combined_stderr,
          "put split s=10 residual " + fmt(r.residual) + " vs 3se " + fmt(kSigmas * r.combined_stderr));

  ProblemSpec s = mean_variance_spec(1.0, 1.0);
  s.vol = constant_vol(0.0);
  const Problem det = make_problem(s);
  const double xs[] = {-1.0, 0.0, 0.7};
  const int fl[] = {1, 1, 1};
  SearchConfig cfg;
  cfg.exact = true;
  cfg.paths_per_atom = 1;
  const DppReport e = verify_dpp(make_empirical_1d(xs, fl), det, TimeGrid::uniform(1.0, 2), 1, cfg, 203);
  d.check(e.residual <= kExact, "deterministic N=3 n=2 residual " + fmt(e.residual));
  return {2, "dynamic programming", d.ok, d.s.str(), 0, 120};
}

CriterionResult c3() {
  Detail d;
  const Problem p = make_problem(mean_variance_spec(0.6, 1.0));
  const double xs[] = {-0.6, 0.2, 1.0};
  const int fl[] = {1, 1, 1};
  SearchConfig cfg;
  cfg.paths_per_atom = 500;
  cfg.coarse_points = 9;
  cfg.tol = 2e-2;
  cfg.max_evals = 150;
  const MonotonicityReport r =
      monotonicity_check(make_empirical_1d(xs, fl), p, TimeGrid::uniform(1.0, 10), 20, cfg, 303);
  double worst = -1e300;
  for (const auto& t : r.trials) {
    worst = std::max(worst, (t.v_stopped - t.v_m) / std::max(std::hypot(t.se_m, t.se_stopped), 1e-12));
  }
  d.check(r.violations == 0,
          std::to_string(r.violations) + " violations in " + std::to_string(r.trials.size()) +
              " trials, worst excess " + fmt(worst) + " se");
  return {3, "stopping-order monotonicity", d.ok, d.s.str(), 0, 180};
}

CriterionResult c4() {
  Detail d;
  const double lambda = 1.0;
  const Problem p = make_problem(mean_variance_spec(0.0, lambda));
  const double xs[] = {0.5, 1.0, 1.5, 2.0};
  const int fl[] = {1, 1, 1, 1};
  const double w[] = {0.2, 0.3, 0.3, 0.2};
  const EmpiricalMeasure m = make_empirical_1d(xs, fl, w);
  const double now = mean_variance_g(m.atoms(), lambda);
  const DualResult dual = mean_variance_dual(m, p, lambda, AlphaGrid{}, PdeConfig{});
  SearchConfig cfg = put_search();
  const SolveResult direct = solve_value(m, p, TimeGrid::uniform(1.0, 10), cfg, 404);
  const double se = direct.estimate.mc_stderr;
  d.check(agree(dual.value, now, 0.0), "dual " + fmt(dual.value) + " vs stop-now " + fmt(now));
  d.check(agree(direct.estimate.value, now, se), "search " + fmt(direct.estimate.value) + " vs stop-now");
  d.check(agree(direct.estimate.value, dual.value, se), "search vs dual");
  return {4, "mean-variance collapse", d.ok, d.s.str(), 0, 120};
}

CriterionResult c5() {
  Detail d;
  const CounterRng rng(505);
  std::vector<double> xs, w;
  std::vector<int> fl;
  for (int k = 0; k < 10; ++k) {
    const auto u = rng.uniform2(static_cast<std::uint64_t>(k), 0, 0);
    xs.push_back(4.0 * u[0] - 2.0);
    w.push_back(0.1 + u[1]);
    fl.push_back(1);
  }
  const EmpiricalMeasure law = make_empirical_1d(xs, fl, w);
  double worst = 0.0;
  for (double a : {0.5, 0.8, 0.9, 0.95}) {
    worst = std::max(worst, std::abs(expected_shortfall(law, a) - expected_shortfall_quantile(law, a)));
  }
  d.check(worst <= kRuTol, "beta-form vs quantile-form max gap " + fmt(worst));

  const double ys[] = {-1.0, -0.2, 0.3, 0.9, 1.6};
  const int yf[] = {1, 1, 1, 0, 1};
  const EmpiricalMeasure m = make_empirical_1d(ys, yf);
  const double alpha = 0.7;
  const EsResult es = expected_shortfall_value(m, put_problem(), alpha, BetaSearch{}, PdeConfig{});
  const double now = expected_shortfall(m, alpha);
  d.check(agree(es.value, now, 0.0), "mean-field ES " + fmt(es.value) + " vs stop-now " + fmt(now));
  return {5, "expected shortfall identity", d.ok, d.s.str(), 0, 60};
}

// int_0^inf phi(mu(psi >= z)) dz by splitting a fine grid at every payoff
// value and evaluating the tail mass at each cell midpoint.
double layer_cake_quadrature(const EmpiricalMeasure& m, const Distortion& phi, const Payoff& psi) {
  std::vector<double> pts;
  double top = 0.0;
  for (const Atom& a : m.atoms()) {
    pts.push_back(psi(a.x[0]));
    top = std::max(top, pts.back());
  }
  const int cells = 20000;
  for (int k = 0; k <= cells; ++k) pts.push_back(top * k / cells);
  std::sort(pts.begin(), pts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double lo = pts[k], hi = pts[k + 1];
    if (hi <= lo) continue;
    const double z = 0.5 * (lo + hi);
    double tail = 0.0;
    for (const Atom& a : m.atoms()) {
      if (psi(a.x[0]) >= z) tail += a.w;
    }
    s += (hi - lo) * phi(tail);
  }
  return s;
}

EmpiricalMeasure random_law(const CounterRng& rng, std::uint32_t tag, int n, double lo, double hi) {
  std::vector<double> xs, w;
  std::vector<int> fl;
  for (int k = 0; k < n; ++k) {
    const auto u = rng.uniform2(static_cast<std::uint64_t>(k), tag, 0);
    xs.push_back(lo + (hi - lo) * u[0]);
    w.push_back(0.05 + u[1]);
    fl.push_back(1);
  }
  return make_empirical_1d(xs, fl, w);
}

CriterionResult c6() {
  Detail d;
  const CounterRng rng(606);
  const Payoff psi = Payoff::call(-1.0);
  double worst = 0.0;
  for (std::uint32_t k = 0; k < 3; ++k) {
    const EmpiricalMeasure m = random_law(rng, k, 6 + 2 * static_cast<int>(k), -2.0, 2.0);
    for (const Distortion phi : {Distortion{Distortion::Kind::power, 0.7}, Distortion{Distortion::Kind::exponential, 2.0}}) {
      worst = std::max(worst, std::abs(distortion_g(m, phi, psi) - layer_cake_quadrature(m, phi, psi)));
    }
  }
  d.check(worst <= kRuTol, "closed form vs quadrature max gap " + fmt(worst));

  const Distortion phi{Distortion::Kind::exponential, 2.0};
  const double lip = phi.lipschitz() * psi.lipschitz();
  int bad = 0;
  double worst_ratio = 0.0;
  for (std::uint32_t k = 0; k < 50; ++k) {
    const EmpiricalMeasure a = random_law(rng, 100 + k, 5, -2.0, 2.0);
    const EmpiricalMeasure b = random_law(rng, 200 + k, 7, -2.0, 2.0);
    const double gap = std::abs(distortion_g(a, phi, psi) - distortion_g(b, phi, psi));
    const double bound = lip * wasserstein(a, b, 1);
    worst_ratio = std::max(worst_ratio, gap / bound);
    if (gap > bound * (1.0 + kLipSlack)) ++bad;
  }
  d.check(bad == 0, std::to_string(bad) + " Lipschitz violations in 50 pairs, worst gap/bound " + fmt(worst_ratio));
  return {6, "distortion evaluator", d.ok, d.s.str(), 0, 60};
}

double u_lin(const EmpiricalMeasure& m) {
  double s = 0.0;
  for (const Atom& a : m.atoms()) {
    const double k = std::sin(a.x[0]);
    s += a.w * (a.i == 1 ? k + 0.5 + 0.25 * std::sin(a.x[0]) : k);
  }
  return s;
}

double u_nonlin(const EmpiricalMeasure& m) {
  double first = 0.0, second = 0.0;
  for (const Atom& a : m.atoms()) {
    if (a.i == 1) first += a.w * (2.0 + std::sin(a.x[0]));
    second += a.w * std::atan(a.x[0]);
  }
  return first * first + second;
}

double survivor_first_moment(const EmpiricalMeasure& m) {
  double s = 0.0;
  for (const Atom& a : m.atoms()) {
    if (a.i == 1) s += a.w * a.x[0];
  }
  return s;
}

CriterionResult c7() {
  Detail d;
  const CounterRng rng(707);
  MollifierParams p;
  double part = 0.0, mass = 0.0;
  for (int n : {2, 4, 8}) {
    p.n = n;
    for (std::uint32_t k = 0; k < 5; ++k) {
      const EmpiricalMeasure mu = random_law(rng, k, 5, -2.0 * n, 2.0 * n);
      const auto psi = partition_weights(mu.atoms(), p);
      part = std::max(part, std::abs(std::accumulate(psi.begin(), psi.end(), 0.0) - 1.0));
      const auto fam = compact_test_family(700 + k);
      const auto z = sample_simplex(p, 708, k);
      for (const auto& m : fam) {
        const EmpiricalMeasure mn = project_measure(m, z, p);
        for (int f : {0, 1}) {
          double a = 0.0, b = 0.0;
          for (const Atom& at : m.atoms()) a += at.i == f ? at.w : 0.0;
          for (const Atom& at : mn.atoms()) b += at.i == f ? at.w : 0.0;
          mass = std::max(mass, std::abs(a - b));
        }
      }
    }
  }
  d.check(part <= kExact, "partition identity max err " + fmt(part));
  d.check(mass <= kExact, "per-flag mass max err " + fmt(mass));

  const auto family = compact_test_family(709);
  for (const auto& [name, u] : {std::pair<const char*, MeasureFunctional>{"linear", u_lin},
                                std::pair<const char*, MeasureFunctional>{"nonlinear", u_nonlin}}) {
    std::vector<double> gaps;
    for (int n : {2, 4, 8, 16}) {
      p.n = n;
      double gap = 0.0;
      for (const auto& m : family) gap = std::max(gap, std::abs(mollify(u, m, p, 710).value - u(m)));
      gaps.push_back(gap);
    }
    bool dec = true;
    std::string list;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
      if (k > 0 && !(gaps[k] < gaps[k - 1])) dec = false;
      list += (k ? "," : "") + fmt(gaps[k]);
    }
    d.check(dec, std::string(name) + " sup-gap " + list);
  }

  // Probe functional increasing in the stopping order on atoms x >= 0.5.
  std::vector<EmpiricalMeasure> bases;
  for (std::uint32_t k = 0; k < 10; ++k) {
    std::vector<double> xs, w;
    std::vector<int> fl;
    for (int a = 0; a < 5; ++a) {
      const auto u = rng.uniform2(static_cast<std::uint64_t>(a), 900 + k, 0);
      xs.push_back(0.5 + 1.5 * u[0]);
      fl.push_back(u[1] < 0.7 ? 1 : 0);
      w.push_back(0.2 + u[1]);
    }
    fl[0] = 1;
    bases.push_back(make_empirical_1d(xs, fl, w));
  }
  p.n = 4;
  const ProbeReport pr = monotonicity_probe(survivor_first_moment, bases, p, 100, 711);
  d.check(pr.violations == 0, std::to_string(pr.violations) + " probe violations in 100 pairs");
  return {7, "mollifier", d.ok, d.s.str(), 0, 180};
}

CriterionResult c8() {
  Detail d;
  // Cubic moment functional: plain quotient O(eps), extrapolated O(eps^2).
  const double xs[] = {-0.4, 0.3, 1.1};
  const int fl[] = {1, 0, 1};
  const double w[] = {0.3, 0.3, 0.4};
  const EmpiricalMeasure m = make_empirical_1d(xs, fl, w);
  const ValueFunctional cube = [](double, const EmpiricalMeasure& mm) {
    double s = 0.0;
    for (const Atom& a : mm.atoms()) s += a.w * a.x[0];
    return s * s * s + s;
  };
  double mean = 0.0;
  for (const Atom& a : m.atoms()) mean += a.w * a.x[0];
  const Atom y{point1(0.9), 1, 1.0};
  const double exact = (3.0 * mean * mean + 1.0) * (0.9 - mean);
  std::vector<double> plain, extra;
  for (double e : {1e-2, 5e-3, 2.5e-3}) {
    plain.push_back(std::abs(linear_derivative(cube, 0.0, m, y, BumpConfig{e, false}) - exact));
    extra.push_back(std::abs(linear_derivative(cube, 0.0, m, y, BumpConfig{e, true}) - exact));
  }
  bool order1 = true, order2 = true;
  for (int k = 0; k < 2; ++k) {
    const double r1 = plain[k] / plain[k + 1], r2 = extra[k] / extra[k + 1];
    order1 = order1 && r1 > 1.8 && r1 < 2.2;
    order2 = order2 && r2 > 3.6 && r2 < 4.4;
  }
  d.check(order1, "plain errors " + fmt(plain[0]) + "," + fmt(plain[1]) + "," + fmt(plain[2]));
  d.check(order2, "extrapolated errors " + fmt(extra[0]) + "," + fmt(extra[1]) + "," + fmt(extra[2]));

  // Unstopped functional of a GBM problem, simulated with common random numbers.
  ProblemSpec s;
  s.drift = gbm_drift(0.05);
  s.vol = gbm_vol(0.2);
  s.running.kind = RunningSpec::Kind::linear;
  s.running.c = point1(0.5);
  s.terminal.kind = TerminalSpec::Kind::squared_mean;
  s.terminal.psi = Payoff::identity();
  const Problem p = make_problem(s);
  const ValueFunctional unstopped = [&p](double t, const EmpiricalMeasure& mm) {
    const PathBundle b = simulate_unstopped(mm, p, TimeGrid(t, p.horizon, 50), 2000, 808, Exec::serial);
    return objective(b, b.alive, p);
  };
  const double gs[] = {0.8, 1.0, 1.3, 0.5};
  const int gf[] = {1, 1, 1, 0};
  const EmpiricalMeasure gm = make_empirical_1d(gs, gf);
  const double t = 0.3;
  const double lu = generator(unstopped, t, gm, p);
  const double f = running_integral(t, gm, p);
  d.check(std::abs(lu + f) <= kGenTol, "GBM generator L U + F = " + fmt(lu + f));
  return {8, "derivative calculus", d.ok, d.s.str(), 0, 120};
}

CriterionResult c9() {
  Detail d;
  const Problem p = put_problem();
  const auto pde = std::make_shared<ObstaclePDEGrid>(standard_os_pde(p, kPut, PdeConfig{}));
  const ValueFunctional u = [pde](double t, const EmpiricalMeasure& m) {
    return aggregate_value(m, t, *pde, kPut, Interp::cubic);
  };
  const CounterRng rng(909);
  ResidualConfig cfg;
  cfg.seed = 910;
  int correct = 0, total = 0, cont_ok = 0, ex_ok = 0;
  for (int k = 0; k < 40; ++k) {
    const bool cont = k % 2 == 0;
    const auto r0 = rng.uniform2(static_cast<std::uint64_t>(k), 0, 0);
    const double t = 0.8 * r0[0];
    std::vector<double> xs;
    std::vector<int> fl;
    for (int a = 0; a < 3; ++a) {
      const double u1 = rng.uniform2(static_cast<std::uint64_t>(k), 1, static_cast<std::uint32_t>(a))[0];
      xs.push_back(cont ? 0.5 + 1.5 * u1 : -5.0 + 2.0 * u1);
      fl.push_back(1);
    }
    xs.push_back(-1.0 + 3.0 * r0[1]);
    fl.push_back(0);
    const EmpiricalMeasure m = make_empirical_1d(xs, fl);
    // Oracle label from the PDE gap v - psi at the survivors.
    double gap_min = 1e300, gap_max = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double g = pde->value(t, xs[a]) - kPut(xs[a]);
      gap_min = std::min(gap_min, g);
      gap_max = std::max(gap_max, g);
    }
    const Region truth = gap_max <= kExerciseGap ? Region::exercise
                         : gap_min > kExerciseGap ? Region::continuation
                                                  : Region::undetermined;
    const Region got = classify(obstacle_residual(u, t, m, p, cfg), kResidualGenTol, kExerciseGap);
    ++total;
    if (got == truth && truth != Region::undetermined) {
      ++correct;
      (cont ? cont_ok : ex_ok) += 1;
    }
  }
  const double rate = static_cast<double>(correct) / total;
  d.check(rate >= kClassifyRate, "classified " + std::to_string(correct) + "/" + std::to_string(total) +
                                     " (continuation " + std::to_string(cont_ok) + ", exercise " +
                                     std::to_string(ex_ok) + ")");
  return {9, "obstacle residual", d.ok, d.s.str(), 0, 180};
}

double brute_force_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = 1e300;
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k) s += ground_distance(a[k], b[perm[k]], a.dim());
    best = std::min(best, s / static_cast<double>(perm.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CriterionResult c10() {
  Detail d;
  const CounterRng rng(1010);
  double mass = 0.0, marg = 0.0;
  for (std::uint32_t k = 0; k < 50; ++k) {
    std::vector<Site> sites;
    std::vector<Point> stops;
    std::vector<double> pv;
    for (int a = 0; a < 8; ++a) {
      const auto u = rng.uniform2(static_cast<std::uint64_t>(a), k, 0);
      const auto v = rng.uniform2(static_cast<std::uint64_t>(a), k, 1);
      sites.push_back(Site{Point{4.0 * u[0] - 2.0, 2.0 * u[1] - 1.0, 0.0}, v[0] < 0.7 ? 1 : 0});
      stops.push_back(sites.back().x);
      pv.push_back(v[1]);
    }
    const EmpiricalMeasure m = make_empirical(2, sites);
    const EmpiricalMeasure ms = apply_stop(m, SiteStopMap(2, stops, pv));
    mass = std::max(mass, std::abs(total_mass(ms.atoms()) - 1.0));
    const EmpiricalMeasure xa = x_marginal(m), xb = x_marginal(ms);
    marg = std::max(marg, approx_equal(xa, xb, kExact) ? 0.0 : 1.0);
  }
  d.check(mass <= kExact, "apply_stop mass err " + fmt(mass));
  d.check(marg == 0.0, "apply_stop x-marginal preserved");

  double wgap = 0.0;
  for (std::uint32_t k = 0; k < 20; ++k) {
    const int n = 2 + static_cast<int>(k % 5);
    std::vector<Site> sa, sb;
    for (int a = 0; a < n; ++a) {
      const auto u = rng.uniform2(static_cast<std::uint64_t>(a), 100 + k, 0);
      const auto v = rng.uniform2(static_cast<std::uint64_t>(a), 100 + k, 1);
      const int dim_flag = k % 2;
      sa.push_back(Site{point1(3.0 * u[0]), dim_flag ? (v[0] < 0.5 ? 1 : 0) : 1});
      sb.push_back(Site{point1(3.0 * u[1] - 1.0), dim_flag ? (v[1] < 0.5 ? 1 : 0) : 1});
    }
    const EmpiricalMeasure a = make_empirical(1, sa), b = make_empirical(1, sb);
    if (a.size() != static_cast<std::size_t>(n) || b.size() != static_cast<std::size_t>(n)) continue;
    wgap = std::max(wgap, std::abs(wasserstein(a, b, 1) - brute_force_w1(a, b)));
  }
  d.check(wgap <= kExact, "W1 vs brute-force matching max gap " + fmt(wgap));

  // Flag-sensitive objective convex in the survival vector: optimum at a vertex.
  double sgap = 0.0;
  for (int n : {3, 8, 12}) {
    std::vector<double> xs, w;
    std::vector<int> fl;
    for (int a = 0; a < n; ++a) {
      const auto u = rng.uniform2(static_cast<std::uint64_t>(a), 300 + static_cast<std::uint32_t>(n), 0);
      xs.push_back(4.0 * u[0] - 2.0);
      w.push_back(0.1 + u[1]);
      fl.push_back(1);
    }
    const EmpiricalMeasure m = make_empirical_1d(xs, fl, w);
    const auto phi = [](const EmpiricalMeasure& mm) {
      double s1 = 0.0, s0 = 0.0;
      for (const Atom& a : mm.atoms()) (a.i == 1 ? s1 : s0) += a.w * (a.i == 1 ? a.x[0] : std::cos(a.x[0]));
      return s1 * s1 + s0;
    };
    double brute = -1e300;
    for (std::uint32_t mask = 0; mask < (1u << m.size()); ++mask) {
      std::vector<Point> st;
      std::vector<double> pv;
      for (std::size_t a = 0; a < m.size(); ++a) {
        st.push_back(m[a].x);
        pv.push_back((mask >> a) & 1u ? 1.0 : 0.0);
      }
      brute = std::max(brute, phi(apply_stop(m, SiteStopMap(1, st, pv))));
    }
    sgap = std::max(sgap, std::abs(stop_sup(m, phi).value - brute));
    const auto g = make_terminal(TerminalSpec{});
    sgap = std::max(sgap, std::abs(terminal_stop_sup(m, g).value - g(m.atoms())));
  }
  d.check(sgap <= kExact, "stop_sup vs enumeration max gap " + fmt(sgap));
  return {10, "exactness layer", d.ok, d.s.str(), 0, 60};
}

using Fn = CriterionResult (*)();
constexpr Fn kCriteria[] = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10};

}  // namespace

int criterion_count() { return static_cast<int>(std::size(kCriteria)); }

std::vector<CriterionResult> run(std::ostream& out, const std::vector<int>& only) {
  std::vector<CriterionResult> results;
  for (int id = 1; id <= criterion_count(); ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = kCriteria[id - 1]();
    } catch (const std::exception& e) {
      r = CriterionResult{id, "criterion " + std::to_string(id), false, std::string("exception: ") + e.what(), 0, 1};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << (r.pass() ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << "): " << r.detail << " ["
        << fmt(r.seconds) << " s / " << r.budget_seconds << " s]" << std::endl;
    results.push_back(r);
  }
  return results;
}

}  // namespace mfos::acceptance
