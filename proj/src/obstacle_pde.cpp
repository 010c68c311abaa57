#include "mfos/obstacle_pde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfos {
namespace {

// Natural cubic spline second derivatives for uniform spacing h.
void spline_second_derivatives(const double* y, int n, double h, double* out) {
  out[0] = 0.0;
  out[n - 1] = 0.0;
  if (n < 3) return;
  std::vector<double> c(n, 0.0), d(n, 0.0);
  // Tridiagonal system: m_{j-1} + 4 m_j + m_{j+1} = 6 (y_{j+1} - 2 y_j + y_{j-1}) / h^2.
  for (int j = 1; j < n - 1; ++j) {
    const double rhs = 6.0 * (y[j + 1] - 2.0 * y[j] + y[j - 1]) / (h * h);
    const double denom = 4.0 - (j > 1 ? c[j - 1] : 0.0);
    c[j] = 1.0 / denom;
    d[j] = (rhs - (j > 1 ? d[j - 1] : 0.0)) / denom;
  }
  out[n - 2] = d[n - 2];
  for (int j = n - 3; j >= 1; --j) out[j] = d[j] - c[j] * out[j + 1];
}

double row_value(const ObstaclePDEGrid& g, int k, double xq, Interp interp) {
  const double s = (xq - g.x_min) / g.h;
  int j = static_cast<int>(std::floor(s));
  j = std::clamp(j, 0, g.nx - 2);
  const double a = s - j;
  const double y0 = g.at(k, j), y1 = g.at(k, j + 1);
  if (interp == Interp::linear) return (1.0 - a) * y0 + a * y1;
  const double* m = g.d2.data() + static_cast<std::size_t>(k) * g.nx;
  const double b = 1.0 - a;
  return b * y0 + a * y1 + (g.h * g.h / 6.0) * ((b * b * b - b) * m[j] + (a * a * a - a) * m[j + 1]);
}

}  // namespace

double ObstaclePDEGrid::value(double t, double xq, Interp interp) const {
  if (!contains(xq)) throw std::out_of_range("point " + std::to_string(xq) + " lies outside the PDE domain");
  if (t < t0 - 1e-12 || t > horizon + 1e-12) throw std::out_of_range("time outside the PDE horizon");
  const double s = std::clamp((t - t0) / dt(), 0.0, static_cast<double>(nt));
  int k = static_cast<int>(std::floor(s));
  k = std::min(k, nt - 1);
  const double a = s - k;
  const double lo = row_value(*this, k, xq, interp);
  if (a == 0.0) return lo;
  return (1.0 - a) * lo + a * row_value(*this, k + 1, xq, interp);
}

ObstaclePDEGrid standard_os_pde(const Problem& problem, const std::function<double(double)>& psi, const PdeConfig& cfg,
                                ObstacleSense sense, double t0) {
  if (problem.d != 1) throw std::invalid_argument("obstacle PDE needs a one-dimensional problem");
  if (problem.measure_dependent) throw std::invalid_argument("obstacle PDE needs measure-independent coefficients");
  if (cfg.nx < 3 || cfg.nt < 1 || !(cfg.x_max > cfg.x_min)) throw std::invalid_argument("invalid PDE grid");
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw std::invalid_argument("PDE theta must lie in [0,1]");
  if (cfg.implicit_start < 0) throw std::invalid_argument("PDE implicit_start must be >= 0");
  if (!(t0 < problem.horizon)) throw std::invalid_argument("PDE start time must precede the horizon");

  ObstaclePDEGrid g;
  g.x_min = cfg.x_min;
  g.nx = cfg.nx;
  g.h = (cfg.x_max - cfg.x_min) / (cfg.nx - 1);
  g.t0 = t0;
  g.horizon = problem.horizon;
  g.nt = cfg.nt;
  g.sense = sense;
  const int nx = g.nx;
  const double h = g.h;
  const double dt = g.dt();
  g.psi.resize(nx);
  for (int j = 0; j < nx; ++j) g.psi[j] = psi(g.x(j));
  g.v.assign(static_cast<std::size_t>(cfg.nt + 1) * nx, 0.0);
  std::copy(g.psi.begin(), g.psi.end(), g.v.begin() + static_cast<std::ptrdiff_t>(cfg.nt) * nx);

  // Operator rows (L v)_j = lo_j v_{j-1} + di_j v_j + up_j v_{j+1} and f_j at time t.
  std::vector<double> lo(nx), di(nx), up(nx), f(nx);
  auto assemble = [&](double t) {
    const LocalCoefficients c = problem.at(t, MeasureView{});
    for (int j = 1; j < nx - 1; ++j) {
      const Point p = point1(g.x(j));
      const double b = c.drift(p)[0];
      const double s = c.vol(p)[0];
      const double diff = 0.5 * s * s / (h * h);
      if (std::abs(b) * h <= s * s) {
        lo[j] = diff - 0.5 * b / h;
        up[j] = diff + 0.5 * b / h;
      } else {
        lo[j] = diff + std::max(-b, 0.0) / h;
        up[j] = diff + std::max(b, 0.0) / h;
      }
      di[j] = -(lo[j] + up[j]);
      f[j] = c.running(p);
    }
  };

  std::vector<double> rhs(nx), cur(nx);
  for (int k = cfg.nt - 1; k >= 0; --k) {
    const double th = cfg.nt - 1 - k < cfg.implicit_start ? 1.0 : cfg.theta;
    const double t_next = g.t0 + (k + 1) * dt;
    const double t_now = g.t0 + k * dt;
    const double* next = g.v.data() + static_cast<std::size_t>(k + 1) * nx;
    // Explicit part at t_{k+1}.
    assemble(t_next);
    for (int j = 1; j < nx - 1; ++j) {
      const double lv = lo[j] * next[j - 1] + di[j] * next[j] + up[j] * next[j + 1];
      rhs[j] = next[j] + (1.0 - th) * dt * (lv + f[j]);
    }
    assemble(t_now);
    for (int j = 1; j < nx - 1; ++j) rhs[j] += th * dt * f[j];
    std::copy(next, next + nx, cur.begin());
    cur[0] = g.psi[0];
    cur[nx - 1] = g.psi[nx - 1];
    bool converged = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
      double change = 0.0;
      for (int j = 1; j < nx - 1; ++j) {
        const double ad = 1.0 - th * dt * di[j];
        const double y = (rhs[j] + th * dt * (lo[j] * cur[j - 1] + up[j] * cur[j + 1])) / ad;
        double nv = cur[j] + cfg.omega * (y - cur[j]);
        nv = sense == ObstacleSense::sup ? std::max(nv, g.psi[j]) : std::min(nv, g.psi[j]);
        change = std::max(change, std::abs(nv - cur[j]));
        cur[j] = nv;
      }
      if (!std::isfinite(change)) throw NumericalError("PSOR diverged");
      if (change < cfg.tol) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericalError("PSOR did not converge within the iteration cap");
    std::copy(cur.begin(), cur.end(), g.v.begin() + static_cast<std::ptrdiff_t>(k) * nx);
  }
  g.d2.assign(g.v.size(), 0.0);
  for (int k = 0; k <= cfg.nt; ++k) {
    spline_second_derivatives(g.v.data() + static_cast<std::size_t>(k) * nx, nx, h,
                              g.d2.data() + static_cast<std::size_t>(k) * nx);
  }
  return g;
}

double aggregate_value(MeasureView m, double t, const ObstaclePDEGrid& pde, const std::function<double(double)>& psi,
                       Interp interp) {
  double s = 0.0;
  for (const Atom& a : m) {
    if (!pde.contains(a.x[0])) {
      throw std::out_of_range("atom at " + std::to_string(a.x[0]) + " lies outside the PDE domain");
    }
    const double stop = psi(a.x[0]);
    if (a.i != 1) {
      s += a.w * stop;
      continue;
    }
    // Interpolating across the payoff kink can cross the obstacle.
    const double v = pde.value(t, a.x[0], interp);
    s += a.w * (pde.sense == ObstacleSense::sup ? std::max(v, stop) : std::min(v, stop));
  }
  return s;
}

}  // namespace mfos
