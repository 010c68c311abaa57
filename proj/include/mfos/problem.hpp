#pragma once

#include <functional>
#include <string>

#include "mfos/measure.hpp"
#include "mfos/risk.hpp"

namespace mfos {

/// Coefficients at one time with the measure argument frozen.
struct LocalCoefficients {
  std::function<Point(const Point&)> drift;
  std::function<Matrix(const Point&)> vol;
  std::function<double(const Point&)> running;
};

/// One stopping problem: dynamics (b, sigma), running reward f, terminal g.
///
/// `at(t, m)` freezes every per-step statistic of m (e.g. the survivor mean)
/// once, so per-particle calls are O(1). `g` sees the x-marginal only: it is
/// called on atoms whose flags it must ignore.
struct Problem {
  int d = 1;
  double horizon = 1.0;
  /// True when any of b, sigma, f reads the measure argument.
  bool measure_dependent = false;
  std::function<LocalCoefficients(double t, MeasureView m)> at;
  std::function<double(MeasureView)> g;
  std::string label;
};

/// Uniform grid t_k = t0 + k (T - t0) / n, k = 0..n.
struct TimeGrid {
  double t0 = 0.0;
  double horizon = 1.0;
  int n = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double horizon_, int n_);
  static TimeGrid uniform(double horizon, int n) { return TimeGrid(0.0, horizon, n); }

  double dt() const { return (horizon - t0) / n; }
  double node(int k) const { return k == n ? horizon : t0 + k * dt(); }
};

// Built-in coefficient catalog.

struct DriftSpec {
  enum class Kind { constant, affine, mean_reverting, mean_field_attraction };
  Kind kind = Kind::constant;
  Point c{};      // constant part
  Matrix a{};     // affine: c + A x (GBM: A = b0 I)
  double kappa = 0.0;
  Point theta{};  // mean-reverting target
};

struct VolSpec {
  enum class Kind { constant, proportional };
  Kind kind = Kind::constant;
  Matrix s{};     // constant matrix
  double s0 = 0.0;  // proportional: diag(s0 |x_k|)
};

struct RunningSpec {
  enum class Kind { zero, constant, linear };
  Kind kind = Kind::zero;
  double a = 0.0;  // a + c . x
  Point c{};
};

struct TerminalSpec {
  enum class Kind { expectation, mean_variance, neg_variance, distortion, neg_expected_shortfall, squared_mean };
  Kind kind = Kind::expectation;
  Payoff psi{};
  double lambda = 1.0;
  Distortion phi{};
  double alpha = 0.9;
};

struct ProblemSpec {
  int d = 1;
  double horizon = 1.0;
  DriftSpec drift{};
  VolSpec vol{};
  RunningSpec running{};
  TerminalSpec terminal{};
  std::string label;
};

Problem make_problem(const ProblemSpec& spec);

/// Terminal functional alone (x-marginal semantics).
std::function<double(MeasureView)> make_terminal(const TerminalSpec& spec);

DriftSpec constant_drift(double b);
DriftSpec gbm_drift(double b0);
VolSpec constant_vol(double s);
VolSpec gbm_vol(double s0);

/// Throws std::domain_error unless b0 - s0^2/2 < 0, so the GBM vanishes at
/// infinity. Returns true when the median path x0 exp((b0 - s0^2/2) T) has
/// dropped below `vanish_tol`, i.e. truncation at T is numerically harmless.
bool gbm_truncation_ok(double b0, double s0, double x0, double horizon, double vanish_tol = 1e-3);

}  // namespace mfos
