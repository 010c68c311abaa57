#include "mfos/examples.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mfos/dynamics.hpp"

namespace mfos {
namespace {

constexpr double kInvPhi = 0.6180339887498949;

// Golden-section minimization of f on [a, b].
template <typename F>
std::pair<double, double> golden_min(F&& f, double a, double b, int iters) {
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iters; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
  return v;
}

}  // namespace

double bachelier_put(double x, double strike, double sigma, double tau) {
  const double d = strike - x;
  const double s = sigma * std::sqrt(tau);
  if (s <= 0.0) return std::max(d, 0.0);
  const double z = d / s;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return d * cdf + s * pdf;
}

ProblemSpec standard_put_spec(double strike, double sigma, double horizon) {
  ProblemSpec s;
  s.d = 1;
  s.horizon = horizon;
  s.drift = constant_drift(0.0);
  s.vol = constant_vol(sigma);
  s.terminal.kind = TerminalSpec::Kind::expectation;
  s.terminal.psi = Payoff::put(strike);
  s.label = "standard_put";
  return s;
}

MeanVarianceDual::MeanVarianceDual(Problem dynamics, double lambda, PdeConfig pde, AlphaGrid grid)
    : dyn_(std::move(dynamics)), lambda_(lambda), pde_(pde), grid_(grid) {
  if (lambda < 0.0) throw std::invalid_argument("mean-variance lambda must be >= 0");
  if (grid.points < 3 || !(grid.hi > grid.lo)) throw std::invalid_argument("alpha grid needs >= 3 points");
}

const ObstaclePDEGrid& MeanVarianceDual::pde_for(double alpha1) {
  auto it = cache_.find(alpha1);
  if (it != cache_.end()) return it->second;
  const Payoff psi = Payoff::quadratic(0.0, alpha1, -0.5 * lambda_);
  auto grid = standard_os_pde(dyn_, [psi](double x) { return psi(x); }, pde_, ObstacleSense::sup);
  return cache_.emplace(alpha1, std::move(grid)).first->second;
}

double MeanVarianceDual::v_alpha(double alpha1, const EmpiricalMeasure& m, double t) {
  const Payoff psi = Payoff::quadratic(0.0, alpha1, -0.5 * lambda_);
  return aggregate_value(m, t, pde_for(alpha1), [psi](double x) { return psi(x); }, Interp::linear);
}

DualResult MeanVarianceDual::solve(const EmpiricalMeasure& m, double t) {
  DualResult r;
  r.alpha2 = -0.5 * lambda_;
  if (lambda_ == 0.0) {
    r.alpha1 = 1.0;
    r.value = v_alpha(1.0, m, t);
    r.scan.emplace_back(1.0, r.value);
    return r;
  }
  auto obj = [&](double a1) { return v_alpha(a1, m, t) - (a1 - 1.0) * (a1 - 1.0) / (2.0 * lambda_); };
  const auto alphas = linspace(grid_.lo, grid_.hi, grid_.points);
  std::size_t best = 0;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    r.scan.emplace_back(alphas[k], obj(alphas[k]));
    if (r.scan[k].second > r.scan[best].second) best = k;
  }
  if (best == 0 || best + 1 == alphas.size()) {
    throw NumericalError("mean-variance dual: maximizer on the alpha-grid boundary; widen the grid");
  }
  const auto [a, neg] = golden_min([&](double a1) { return -obj(a1); }, alphas[best - 1], alphas[best + 1],
                                   grid_.refine_iters);
  if (-neg >= r.scan[best].second) {
    r.alpha1 = a;
    r.value = -neg;
  } else {
    r.alpha1 = alphas[best];
    r.value = r.scan[best].second;
  }
  return r;
}

DualResult mean_variance_dual(const EmpiricalMeasure& m, const Problem& dynamics, double lambda,
                              const AlphaGrid& grid, const PdeConfig& pde) {
  MeanVarianceDual dual(dynamics, lambda, pde, grid);
  return dual.solve(m, 0.0);
}

AlphaDrift alpha_star_drift(const EmpiricalMeasure& m, MeanVarianceDual& dual, int grid_steps, int checkpoints,
                            int paths_per_atom, std::uint64_t seed) {
  if (checkpoints < 1 || grid_steps < checkpoints) throw std::invalid_argument("alpha drift: bad checkpoint count");
  const DualResult r0 = dual.solve(m, 0.0);
  const ObstaclePDEGrid& pde = dual.pde_for(r0.alpha1);
  const Payoff psi = Payoff::quadratic(0.0, r0.alpha1, -0.5 * dual.lambda());
  const TimeGrid grid = TimeGrid::uniform(pde.horizon, grid_steps);
  const StopRule rule = [&](int k, const Point& x) {
    return pde.value(grid.node(k), x[0]) - psi(x[0]) <= 1e-9 ? 0.0 : 1.0;
  };
  const PathBundle b = simulate(m, dual.dynamics(), grid, paths_per_atom, seed, rule);
  AlphaDrift out;
  for (int j = 0; j < checkpoints; ++j) {
    const int k = j * grid_steps / checkpoints;
    const double a1 =
        k == 0 ? r0.alpha1
               : dual.solve(EmpiricalMeasure::from_atoms(1, snapshot_atoms(b, k, false), 1e-9), grid.node(k)).alpha1;
    out.times.push_back(grid.node(k));
    out.alpha1.push_back(a1);
    out.max_drift = std::max(out.max_drift, std::abs(a1 - r0.alpha1));
  }
  return out;
}

EsResult expected_shortfall_value(const EmpiricalMeasure& m, const Problem& dynamics, double alpha,
                                  const BetaSearch& search, const PdeConfig& pde, double t) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (search.scan_points < 3 || !(search.hi > search.lo)) throw std::invalid_argument("beta scan needs >= 3 points");
  EsResult res;
  auto obj = [&](double beta) {
    auto psi = [beta](double x) { return std::max(x - beta, 0.0); };
    const ObstaclePDEGrid g = standard_os_pde(dynamics, psi, pde, ObstacleSense::inf);
    return beta + aggregate_value(m, t, g, psi) / (1.0 - alpha);
  };
  double center = 0.5 * (search.lo + search.hi);
  double half = 0.5 * (search.hi - search.lo);
  for (int attempt = 0; attempt <= search.max_expansions; ++attempt, half *= 2.0) {
    const auto betas = linspace(center - half, center + half, search.scan_points);
    res.scan.clear();
    std::size_t best = 0;
    for (std::size_t k = 0; k < betas.size(); ++k) {
      res.scan.emplace_back(betas[k], obj(betas[k]));
      if (res.scan[k].second < res.scan[best].second) best = k;
    }
    if (best == 0 || best + 1 == betas.size()) continue;
    const auto [b, v] = golden_min(obj, betas[best - 1], betas[best + 1], search.golden_iters);
    if (v <= res.scan[best].second) {
      res.beta = b;
      res.value = v;
    } else {
      res.beta = betas[best];
      res.value = res.scan[best].second;
    }
    return res;
  }
  throw NumericalError("expected shortfall: no bracket for the beta minimum in the configured range");
}

}  // namespace mfos
