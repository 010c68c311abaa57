#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mfos/measure.hpp"
#include "mfos/problem.hpp"

namespace mfos {

/// u(t, m) on the extended state space.
using ValueFunctional = std::function<double(double t, const EmpiricalMeasure& m)>;

struct BumpConfig {
  double eps = 1e-2;
  /// Combine the eps and eps/2 quotients as 2 D(eps/2) - D(eps).
  bool richardson = true;
  /// Spatial step h = h_rel (1 + |x|).
  double h_rel = 1e-3;
  /// Time step dt_rel * T for the central time difference.
  double dt_rel = 1e-3;
};

/// Bump quotient [u((1 - eps) m + eps delta_y) - u(m)] / eps. To first order
/// this is delta_m u(y) - int delta_m u dm, the zero-mean representative.
double linear_derivative(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Atom& y,
                         const BumpConfig& cfg = {});

struct DerivativeEstimate {
  std::vector<double> delta_m;     // per atom of m, recentered so sum w delta_m = 0
  std::vector<Point> survivors;    // survivor atom positions
  std::vector<double> survivor_w;
  std::vector<double> d_i;         // D_I u at each survivor
  std::vector<Point> dx_delta;     // gradient of delta_m u(., 1) at each survivor
  std::vector<Matrix> dxx_delta;   // Hessian of delta_m u(., 1) at each survivor
  double dt = 0.0;                 // time derivative of u
  double eps = 0.0;
  double h_rel = 0.0;
  double time_step = 0.0;
};

/// All first-order quantities at (t, m). The spatial stencils avoid the atom
/// itself (points x +- h and x +- 3h), so a simulated u with common random
/// numbers sees the same bump particle at every stencil point.
DerivativeEstimate derivative_estimate(const ValueFunctional& u, double t, const EmpiricalMeasure& m,
                                       double horizon, const BumpConfig& cfg = {});

/// D_I u(t, m, x) = delta_m u(x, 1) - delta_m u(x, 0).
double d_i(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Point& x, const BumpConfig& cfg = {});

/// d/dt u + int (b . grad + a : Hess / 2) delta_m u(x, 1) m(dx, 1).
double generator(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Problem& problem,
                 const BumpConfig& cfg = {});

/// int f(t, x, m) m(dx, 1).
double running_integral(double t, const EmpiricalMeasure& m, const Problem& problem);

struct ResidualConfig {
  BumpConfig bumps{};
  /// Random stop maps probing the admissible set, besides p = 0 and p = 1.
  int stop_maps = 64;
  /// m' is admissible when u(t, m') >= u(t, m) - keep_tol.
  double keep_tol = 1e-6;
  /// Jittered copies of m for the lower envelope of D_I.
  int jitters = 4;
  double jitter_rel = 1e-2;
  std::uint64_t seed = 1;
};

struct ResidualReport {
  double interior_term = 0.0;          // min over admissible m' of -(L u + F)(t, m')
  std::optional<double> d_i_min;       // empty when m has no survivors
  double residual = 0.0;
  int admissible = 0;
};

ResidualReport obstacle_residual(const ValueFunctional& u, double t, const EmpiricalMeasure& m,
                                 const Problem& problem, const ResidualConfig& cfg = {});

enum class Region { continuation, exercise, undetermined };

/// continuation: |interior_term| <= gen_tol and d_i_min > di_tol;
/// exercise: |d_i_min| <= di_tol.
Region classify(const ResidualReport& r, double gen_tol, double di_tol);

}  // namespace mfos
