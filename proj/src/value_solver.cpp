#include "mfos/value_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "mfos/rng.hpp"
#include "parallel.hpp"

namespace mfos {
namespace {

using detail::parallel_for;

struct Eval {
  double value = -std::numeric_limits<double>::infinity();
  double survival = 0.0;  // time-summed alive weight, for tie-breaks
};

bool better(const Eval& a, const Eval& b) {
  const double tie = 1e-12 * (1.0 + std::abs(b.value));
  if (a.value > b.value + tie) return true;
  return a.value > b.value - tie && a.survival > b.survival;
}

double survival_mass(const PathBundle& b, std::span<const double> alive) {
  double s = 0.0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(b.grid.n) * b.N; ++k) s += alive[k];
  return s;
}

class Evaluator {
 public:
  Evaluator(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid, int ppa, std::uint64_t seed)
      : m0_(m0), problem_(problem), grid_(grid), ppa_(ppa), seed_(seed) {
    unstopped_ = simulate_unstopped(m0, problem, grid, ppa, seed);
  }

  const PathBundle& unstopped() const { return unstopped_; }

  Eval operator()(const Policy& pol) const {
    Eval e;
    if (!problem_.measure_dependent) {
      const auto alive = replay_alive(unstopped_, pol.rule());
      e.value = objective(unstopped_, alive, problem_);
      e.survival = survival_mass(unstopped_, alive);
    } else {
      const PathBundle b = simulate(m0_, problem_, grid_, ppa_, seed_, pol.rule(), Exec::serial);
      e.value = objective(b, b.alive, problem_);
      e.survival = survival_mass(b, b.alive);
    }
    return e;
  }

  ValueEstimate estimate(const Policy& pol) const {
    ValueEstimate est;
    if (!problem_.measure_dependent) {
      const auto alive = replay_alive(unstopped_, pol.rule());
      est.value = objective(unstopped_, alive, problem_);
      est.mc_stderr = bootstrap_stderr(unstopped_, alive, problem_, seed_);
    } else {
      const PathBundle b = simulate(m0_, problem_, grid_, ppa_, seed_, pol.rule());
      est.value = objective(b, b.alive, problem_);
      est.mc_stderr = bootstrap_stderr(b, b.alive, problem_, seed_);
    }
    est.n_paths = unstopped_.N;
    return est;
  }

 private:
  const EmpiricalMeasure& m0_;
  const Problem& problem_;
  TimeGrid grid_;
  int ppa_;
  std::uint64_t seed_;
  PathBundle unstopped_;
};

// A family with a flat parameter vector, per-coordinate bounds and steps.
struct Parameterization {
  std::vector<double> lo, hi, step0, scale;
  std::function<Policy(const std::vector<double>&)> make;
  std::vector<std::vector<double>> sweep;  // coarse starting points
};

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
  return v;
}

Parameterization parameterize(const SearchConfig& cfg, int n, double xmin, double xmax) {
  const int coarse = std::max(cfg.coarse_points, 3);
  const double range = std::max(xmax - xmin, 1e-6);
  const double margin = range / (coarse - 1);
  Parameterization P;
  auto uniform = [&](std::size_t dims, double lo, double hi, double step) {
    P.lo.assign(dims, lo);
    P.hi.assign(dims, hi);
    P.step0.assign(dims, step);
    P.scale.assign(dims, hi - lo);
  };
  switch (cfg.family) {
    case PolicyFamily::threshold: {
      const double lo = xmin - margin, hi = xmax + margin;
      uniform(n, lo, hi, margin);
      const bool below = cfg.stop_below;
      P.make = [below](const std::vector<double>& th) { return Policy::threshold(th, below); };
      for (double t : linspace(lo, hi, coarse)) P.sweep.push_back(std::vector<double>(n, t));
      break;
    }
    case PolicyFamily::constant_fraction: {
      uniform(n, 0.0, 1.0, 1.0 / (coarse - 1));
      P.make = [](const std::vector<double>& q) {
        Policy p;
        p.family = PolicyFamily::constant_fraction;
        for (double v : q) p.params.push_back({v});
        return p;
      };
      for (double q : linspace(0.0, 1.0, coarse)) P.sweep.push_back(std::vector<double>(n, q));
      break;
    }
    case PolicyFamily::logistic: {
      const double amax = 50.0 / range;
      const double cmax = 50.0 * (1.0 + std::max(std::abs(xmin), std::abs(xmax)) / range);
      P.lo.clear();
      for (int k = 0; k < n; ++k) {
        P.lo.insert(P.lo.end(), {-amax, -cmax});
        P.hi.insert(P.hi.end(), {amax, cmax});
        P.step0.insert(P.step0.end(), {2.0 / range, 1.0});
        P.scale.insert(P.scale.end(), {2.0 * amax, 2.0 * cmax});
      }
      P.make = [](const std::vector<double>& v) {
        Policy p;
        p.family = PolicyFamily::logistic;
        for (std::size_t k = 0; k + 1 < v.size(); k += 2) p.params.push_back({v[k], v[k + 1]});
        return p;
      };
      for (double c : {-20.0, 20.0}) {
        std::vector<double> v;
        for (int k = 0; k < n; ++k) v.insert(v.end(), {0.0, c});
        P.sweep.push_back(v);
      }
      for (double a : {-8.0 / range, 8.0 / range}) {
        for (double x0 : linspace(xmin, xmax, coarse)) {
          std::vector<double> v;
          for (int k = 0; k < n; ++k) v.insert(v.end(), {a, -a * x0});
          P.sweep.push_back(v);
        }
      }
      break;
    }
    case PolicyFamily::tabular: {
      const int bins = std::max(cfg.tabular_bins, 1);
      std::vector<double> edges;
      for (int j = 1; j < bins; ++j) edges.push_back(xmin + range * j / bins);
      uniform(static_cast<std::size_t>(n) * bins, 0.0, 1.0, 0.5);
      P.make = [edges, bins](const std::vector<double>& v) {
        Policy p;
        p.family = PolicyFamily::tabular;
        p.edges = edges;
        for (std::size_t k = 0; k < v.size(); k += bins) p.params.emplace_back(v.begin() + k, v.begin() + k + bins);
        return p;
      };
      for (int cut = 0; cut <= bins; ++cut) {
        std::vector<double> row(bins, 1.0);
        for (int j = 0; j < cut; ++j) row[cfg.stop_below ? j : bins - 1 - j] = 0.0;
        std::vector<double> v;
        for (int k = 0; k < n; ++k) v.insert(v.end(), row.begin(), row.end());
        P.sweep.push_back(v);
      }
      P.sweep.push_back(std::vector<double>(static_cast<std::size_t>(n) * bins, 0.5));
      break;
    }
  }
  return P;
}

SolveResult solve_exact(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid, std::uint64_t seed) {
  const auto never = [](int, std::size_t, const Point&) { return 1.0; };
  const PathBundle a = simulate_particles(m0, problem, grid, 1, seed, never, Exec::serial);
  const PathBundle b = simulate_particles(m0, problem, grid, 1, derive_seed(seed, 1), never, Exec::serial);
  if (a.x != b.x) throw std::invalid_argument("exact search needs deterministic dynamics (sigma = 0)");

  std::vector<std::size_t> survivors;
  for (std::size_t p = 0; p < a.N; ++p) {
    if (a.alive0[p] > 0.0) survivors.push_back(p);
  }
  const std::size_t radix = static_cast<std::size_t>(grid.n) + 1;
  std::size_t total = 1;
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    if (total > kMaxExactAssignments / radix) throw std::domain_error("exact search: too many stop assignments");
    total *= radix;
  }

  auto decode = [&](std::size_t code) {
    std::vector<int> stop_node(a.N, grid.n);
    for (std::size_t s : survivors) {
      stop_node[s] = static_cast<int>(code % radix);
      code /= radix;
    }
    return stop_node;
  };
  auto run = [&](const std::vector<int>& stop_node) {
    return simulate_particles(
        m0, problem, grid, 1, seed,
        [&stop_node](int k, std::size_t p, const Point&) { return k == stop_node[p] ? 0.0 : 1.0; }, Exec::serial);
  };

  std::vector<Eval> evals(total);
  parallel_for(total, [&](std::size_t code) {
    const PathBundle r = run(decode(code));
    evals[code] = Eval{objective(r, r.alive, problem), survival_mass(r, r.alive)};
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < total; ++c) {
    if (better(evals[c], evals[best])) best = c;
  }

  // Express the winner as a tabular policy with one bin per visited position.
  const auto stop_node = decode(best);
  const PathBundle r = run(stop_node);
  std::vector<double> xs;
  for (int k = 0; k < grid.n; ++k) {
    for (std::size_t p = 0; p < r.N; ++p) xs.push_back(r.position(k, p)[0]);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  Policy pol;
  pol.family = PolicyFamily::tabular;
  for (std::size_t j = 1; j < xs.size(); ++j) pol.edges.push_back(0.5 * (xs[j - 1] + xs[j]));
  pol.params.assign(grid.n, std::vector<double>(pol.edges.size() + 1, 1.0));
  for (std::size_t p = 0; p < r.N; ++p) {
    const int k = stop_node[p];
    if (k >= grid.n || r.alive0[p] <= 0.0) continue;
    const double x = r.position(k, p)[0];
    const auto bin = static_cast<std::size_t>(std::upper_bound(pol.edges.begin(), pol.edges.end(), x) - pol.edges.begin());
    pol.params[k][bin] = 0.0;
  }

  SolveResult res;
  res.policy = std::move(pol);
  res.estimate.value = evals[best].value;
  res.estimate.mc_stderr = 0.0;
  res.estimate.n_paths = r.N;
  res.evaluations = total;
  return res;
}

}  // namespace

SolveResult solve_value(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                        const SearchConfig& cfg, std::uint64_t seed) {
  if (cfg.exact) return solve_exact(m0, problem, grid, seed);
  if (cfg.paths_per_atom < 1) throw std::invalid_argument("search: paths_per_atom must be >= 1");
  for (const Policy& p : cfg.extra_candidates) {
    if (p.nodes() != grid.n) throw std::invalid_argument("search: extra candidate has the wrong node count");
  }
  const Evaluator eval(m0, problem, grid, cfg.paths_per_atom, seed);
  const PathBundle& u = eval.unstopped();

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  for (int k = 0; k < grid.n; ++k) {
    for (std::size_t p = 0; p < u.N; ++p) {
      const double x = u.position(k, p)[0];
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  }
  if (xmax - xmin < 1e-9) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  const Parameterization P = parameterize(cfg, grid.n, xmin, xmax);

  SolveResult res;
  std::size_t evals = 0;

  // Coarse sweep over shared parameters, plus fixed candidates.
  std::vector<Policy> fixed{Policy::never_stop(grid.n), Policy::stop_at(grid.n, 0)};
  fixed.insert(fixed.end(), cfg.extra_candidates.begin(), cfg.extra_candidates.end());
  std::vector<Eval> sweep_vals(P.sweep.size());
  std::vector<Eval> fixed_vals(fixed.size());
  parallel_for(P.sweep.size() + fixed.size(), [&](std::size_t i) {
    if (i < P.sweep.size()) {
      sweep_vals[i] = eval(P.make(P.sweep[i]));
    } else {
      fixed_vals[i - P.sweep.size()] = eval(fixed[i - P.sweep.size()]);
    }
  });
  evals += P.sweep.size() + fixed.size();

  std::size_t start = 0;
  for (std::size_t i = 1; i < sweep_vals.size(); ++i) {
    if (better(sweep_vals[i], sweep_vals[start])) start = i;
  }
  std::vector<double> theta = P.sweep[start];
  Eval cur = sweep_vals[start];

  // Coordinate ascent: evaluate every single-coordinate move, take the best.
  std::vector<double> step = P.step0;
  bool converged = false;
  while (static_cast<int>(evals) < cfg.max_evals) {
    std::vector<std::vector<double>> moves;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      for (double dir : {-1.0, 1.0}) {
        auto t = theta;
        t[i] = std::clamp(t[i] + dir * step[i], P.lo[i], P.hi[i]);
        if (t[i] != theta[i]) moves.push_back(std::move(t));
      }
    }
    std::vector<Eval> vals(moves.size());
    parallel_for(moves.size(), [&](std::size_t i) { vals[i] = eval(P.make(moves[i])); });
    evals += moves.size();
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (better(vals[i], pick ? vals[*pick] : cur)) pick = i;
    }
    if (pick && better(vals[*pick], cur)) {
      theta = moves[*pick];
      cur = vals[*pick];
      continue;
    }
    bool small = true;
    for (std::size_t i = 0; i < step.size(); ++i) {
      step[i] *= 0.5;
      small = small && step[i] < cfg.tol * P.scale[i];
    }
    if (small) {
      converged = true;
      break;
    }
  }

  Policy best = P.make(theta);
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (better(fixed_vals[i], cur)) {
      cur = fixed_vals[i];
      best = fixed[i];
    }
  }
  res.policy = best;
  res.estimate = eval.estimate(best);
  res.evaluations = evals;
  res.budget_exhausted = !converged;
  return res;
}

DppReport verify_dpp(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid, int s,
                     const SearchConfig& cfg, std::uint64_t seed) {
  if (s <= 0 || s > grid.n) throw std::invalid_argument("verify_dpp: split index must satisfy 0 < s <= n");
  DppReport rep;
  const SolveResult lhs = solve_value(m0, problem, grid, cfg, seed);
  rep.lhs = lhs.estimate.value;
  rep.lhs_stderr = lhs.estimate.mc_stderr;

  const int ppa = cfg.exact ? 1 : cfg.paths_per_atom;
  SearchConfig tail_cfg = cfg;
  tail_cfg.extra_candidates.clear();
  const std::uint64_t tail_seed = derive_seed(seed, 0xD0D0u + static_cast<std::uint64_t>(s));

  // First-segment rules.
  std::vector<ParticleStopRule> rules;
  std::vector<std::vector<int>> assignments;
  std::vector<Policy> policies;
  if (cfg.exact) {
    const PathBundle probe = spawn_particles(m0, grid, 1, seed);
    std::vector<std::size_t> survivors;
    for (std::size_t p = 0; p < probe.N; ++p) {
      if (probe.alive0[p] > 0.0) survivors.push_back(p);
    }
    const std::size_t radix = static_cast<std::size_t>(s) + 1;
    std::size_t total = 1;
    for (std::size_t k = 0; k < survivors.size(); ++k) {
      if (total > kMaxExactAssignments / radix) throw std::domain_error("verify_dpp: too many stop assignments");
      total *= radix;
    }
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<int> node(probe.N, s);
      std::size_t c = code;
      for (std::size_t p : survivors) {
        node[p] = static_cast<int>(c % radix);
        c /= radix;
      }
      assignments.push_back(std::move(node));
    }
    for (const auto& a : assignments) {
      rules.push_back([&a](int k, std::size_t p, const Point&) { return k == a[p] ? 0.0 : 1.0; });
    }
  } else {
    policies = {lhs.policy, Policy::never_stop(grid.n), Policy::stop_at(grid.n, 0)};
    SearchConfig sweep_cfg = cfg;
    sweep_cfg.max_evals = 0;
    const SolveResult coarse = solve_value(m0, problem, grid, sweep_cfg, seed);
    policies.push_back(coarse.policy);
    for (const Policy& p : policies) {
      rules.push_back([&p](int k, std::size_t, const Point& x) { return p.survival(k, x); });
    }
  }
  rep.first_segment_candidates = rules.size();

  struct Candidate {
    double value = -std::numeric_limits<double>::infinity();
    double stderr_ = 0.0;
  };
  std::vector<Candidate> cands(rules.size());
  const double dt = grid.dt();
  auto run_one = [&](std::size_t i) {
    const PathBundle b = simulate_particles(m0, problem, grid, ppa, seed, rules[i], Exec::serial, s - 1);
    double run = 0.0;
    for (int k = 0; k < s; ++k) {
      double acc = 0.0;
      for (std::size_t p = 0; p < b.N; ++p) {
        const double a = b.alive[static_cast<std::size_t>(k) * b.N + p];
        if (a > 0.0) acc += a * b.running[static_cast<std::size_t>(k) * b.N + p];
      }
      run += dt * acc;
    }
    if (s == grid.n) {
      // Restart at T is terminal_stop_sup, which returns g of the law.
      cands[i].value = objective(b, b.alive, problem);
      cands[i].stderr_ = cfg.exact ? 0.0 : bootstrap_stderr(b, b.alive, problem, seed);
      return;
    }
    const auto atoms = snapshot_atoms(b, s, false);
    const EmpiricalMeasure ms = EmpiricalMeasure::from_atoms(m0.dim(), atoms, 1e-9);
    SearchConfig c2 = tail_cfg;
    if (!cfg.exact) c2.paths_per_atom = std::max<int>(1, static_cast<int>(b.N / ms.size()));
    const SolveResult r = solve_value(ms, problem, TimeGrid(grid.node(s), grid.horizon, grid.n - s), c2, tail_seed);
    cands[i].value = run + r.estimate.value;
    cands[i].stderr_ = r.estimate.mc_stderr;
  };
  if (cfg.exact) {
    parallel_for(rules.size(), run_one);
  } else {
    for (std::size_t i = 0; i < rules.size(); ++i) run_one(i);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].value > cands[best].value) best = i;
  }
  rep.rhs = cands[best].value;
  rep.rhs_stderr = cands[best].stderr_;
  rep.residual = std::abs(rep.lhs - rep.rhs);
  rep.combined_stderr = std::hypot(rep.lhs_stderr, rep.rhs_stderr);
  return rep;
}

MonotonicityReport monotonicity_check(const EmpiricalMeasure& m, const Problem& problem, const TimeGrid& grid,
                                      int trials, const SearchConfig& cfg, std::uint64_t seed) {
  MonotonicityReport rep;
  std::vector<Point> sites;
  for (const Atom& a : m.atoms()) {
    if (a.i == 1) sites.push_back(a.x);
  }
  const CounterRng rng(derive_seed(seed, 0x303u));
  for (int t = 0; t < trials; ++t) {
    std::vector<double> vals(sites.size());
    for (std::size_t j = 0; j < sites.size(); ++j) {
      vals[j] = t == 0 ? 1.0 : t == 1 ? 0.0 : rng.uniform2(j, static_cast<std::uint32_t>(t), 0)[0];
    }
    const SiteStopMap map(m.dim(), sites, vals);
    const EmpiricalMeasure mp = apply_stop(m, map);
    const SolveResult rp = solve_value(mp, problem, grid, cfg, seed);
    Policy composite = rp.policy;
    composite.initial_stop = map;
    SearchConfig cm = cfg;
    cm.extra_candidates.push_back(composite);
    const SolveResult rm = solve_value(m, problem, grid, cm, seed);
    MonotonicityTrial tr;
    tr.v_m = rm.estimate.value;
    tr.se_m = rm.estimate.mc_stderr;
    tr.v_stopped = rp.estimate.value;
    tr.se_stopped = rp.estimate.mc_stderr;
    tr.violation = tr.v_stopped - tr.v_m > 3.0 * std::hypot(tr.se_m, tr.se_stopped) + 1e-12 * (1.0 + std::abs(tr.v_m));
    rep.violations += tr.violation ? 1 : 0;
    rep.trials.push_back(tr);
  }
  return rep;
}

}  // namespace mfos
