#pragma once

#include <map>
#include <vector>

#include "mfos/obstacle_pde.hpp"
#include "mfos/problem.hpp"
#include "mfos/risk.hpp"

namespace mfos {

/// Analytic value E[(K - x - sqrt(T) Z)^+] of the never-stopped put under
/// driftless unit-volatility dynamics scaled by sigma.
double bachelier_put(double x, double strike, double sigma, double tau);

/// d = 1 problem with driftless Brownian dynamics of volatility `sigma` and
/// linear reward g(mu) = int (K - x)^+ mu(dx).
ProblemSpec standard_put_spec(double strike = 1.0, double sigma = 1.0, double horizon = 1.0);

struct AlphaGrid {
  double lo = -5.0;
  double hi = 5.0;
  int points = 41;
  /// Golden-section iterations around the best grid point.
  int refine_iters = 40;
};

struct DualResult {
  double value = 0.0;
  double alpha1 = 1.0;  // weight on psi_1(x) = x
  double alpha2 = 0.0;  // weight on psi_2(x) = x^2 (fixed at -lambda/2)
  std::vector<std::pair<double, double>> scan;  // (alpha1, V_alpha - phi*(alpha))
};

/// Mean-variance reward g(mu) = phi(int x, int x^2) with
/// phi(z1, z2) = z1 + lambda/2 z1^2 - lambda/2 z2 (i.e. mean - lambda/2 Var).
/// Solved as sup_alpha [V_alpha - phi*(alpha)] where V_alpha is the linear
/// problem with payoff alpha1 x + alpha2 x^2 and phi*(alpha) is finite only
/// for alpha2 = -lambda/2, where it equals (alpha1 - 1)^2 / (2 lambda).
/// PDE solves are cached per alpha1 so the dual can be re-evaluated at later
/// times along a flow.
class MeanVarianceDual {
 public:
  MeanVarianceDual(Problem dynamics, double lambda, PdeConfig pde, AlphaGrid grid);

  /// Throws NumericalError when the maximizer sits on the alpha-grid boundary.
  DualResult solve(const EmpiricalMeasure& m, double t = 0.0);
  /// V_alpha(t, m) by aggregation over the alpha PDE.
  double v_alpha(double alpha1, const EmpiricalMeasure& m, double t);
  const ObstaclePDEGrid& pde_for(double alpha1);
  double lambda() const { return lambda_; }
  const Problem& dynamics() const { return dyn_; }

 private:
  Problem dyn_;
  double lambda_;
  PdeConfig pde_;
  AlphaGrid grid_;
  std::map<double, ObstaclePDEGrid> cache_;
};

DualResult mean_variance_dual(const EmpiricalMeasure& m, const Problem& dynamics, double lambda,
                              const AlphaGrid& grid, const PdeConfig& pde);

struct AlphaDrift {
  std::vector<double> times;
  std::vector<double> alpha1;
  double max_drift = 0.0;  // max_k |alpha1(t_k) - alpha1(t_0)|
};

/// Re-solves the dual along the flow obtained by stopping where the alpha*
/// PDE is at its obstacle, at `checkpoints` evenly spaced nodes. Diagnostic
/// only: argmax ties make the drift Monte-Carlo fragile.
AlphaDrift alpha_star_drift(const EmpiricalMeasure& m, MeanVarianceDual& dual, int grid_steps, int checkpoints,
                            int paths_per_atom, std::uint64_t seed);

struct BetaSearch {
  double lo = -5.0;
  double hi = 5.0;
  int scan_points = 21;
  int golden_iters = 50;
  /// Bracket widening attempts (each doubles the half-width).
  int max_expansions = 6;
};

struct EsResult {
  double value = 0.0;
  double beta = 0.0;
  std::vector<std::pair<double, double>> scan;  // (beta, objective)
};

/// Mean-field expected-shortfall minimization
///   V(t, m) = inf_beta { beta + V_beta(t, m) / (1 - alpha) }
/// with V_beta the minimal expected (x - beta)^+ over stopping (inf-sense
/// obstacle problem). The outer minimum uses golden-section search on a
/// bracket found by scanning. Throws NumericalError when no bracket exists.
EsResult expected_shortfall_value(const EmpiricalMeasure& m, const Problem& dynamics, double alpha,
                                  const BetaSearch& search, const PdeConfig& pde, double t = 0.0);

}  // namespace mfos
