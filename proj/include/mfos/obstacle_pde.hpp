#pragma once

#include <functional>
#include <vector>

#include "mfos/measure.hpp"
#include "mfos/problem.hpp"

namespace mfos {

struct PdeConfig {
  double x_min = -6.0;
  double x_max = 8.0;
  int nx = 701;
  int nt = 400;
  /// 1 = fully implicit, 0.5 = Crank-Nicolson.
  double theta = 0.5;
  /// Fully implicit steps taken first from the terminal row, to damp the
  /// payoff kink before switching to theta.
  int implicit_start = 4;
  double omega = 1.4;
  double tol = 1e-11;
  int max_iter = 50000;
};

/// sup: v >= psi (stop to collect a reward). inf: v <= psi (stop to cap a cost).
enum class ObstacleSense { sup, inf };

enum class Interp { linear, cubic };

/// Value surface v(t_k, x_j) of the one-dimensional obstacle problem on a
/// uniform (t, x) grid. Row k holds time t0 + k dt.
struct ObstaclePDEGrid {
  double x_min = 0.0;
  double h = 1.0;
  int nx = 0;
  double t0 = 0.0;
  double horizon = 1.0;
  int nt = 0;
  ObstacleSense sense = ObstacleSense::sup;
  std::vector<double> v;    // (nt + 1) * nx
  std::vector<double> psi;  // nx
  std::vector<double> d2;   // (nt + 1) * nx natural-spline second derivatives in x

  double x(int j) const { return x_min + j * h; }
  double x_max() const { return x(nx - 1); }
  double dt() const { return (horizon - t0) / nt; }
  double at(int k, int j) const { return v[static_cast<std::size_t>(k) * nx + j]; }
  bool contains(double xq) const { return xq >= x_min - 1e-12 && xq <= x_max() + 1e-12; }

  /// v(t, x): linear in t between rows, linear or natural cubic spline in x.
  /// Throws std::out_of_range outside the grid.
  double value(double t, double xq, Interp interp = Interp::linear) const;
};

/// Backward theta-scheme for min{-(d_t + L)v - f, v - psi} = 0 (sup sense;
/// the inf sense flips the projection). Central differences, or upwind drift
/// where the cell Peclet number exceeds 1. Each step is solved by projected
/// SOR to `tol`; v = psi on the domain edges. Coefficients are read from
/// problem.at(t, {}) and must not depend on the measure.
/// Throws NumericalError when PSOR does not converge within max_iter.
ObstaclePDEGrid standard_os_pde(const Problem& problem, const std::function<double(double)>& psi, const PdeConfig& cfg,
                                ObstacleSense sense = ObstacleSense::sup, double t0 = 0.0);

/// Sum over atoms of w (v(t, x) i + psi(x) (1 - i)), with the interpolated v
/// projected onto the obstacle side of psi. Throws std::out_of_range for atoms
/// outside the PDE domain.
double aggregate_value(MeasureView m, double t, const ObstaclePDEGrid& pde, const std::function<double(double)>& psi,
                       Interp interp = Interp::linear);

}  // namespace mfos
