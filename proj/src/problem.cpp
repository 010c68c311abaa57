#include "mfos/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace mfos {
namespace {

double survivor_mean(MeasureView m, int c) {
  double w = 0.0, s = 0.0;
  for (const Atom& a : m) {
    if (a.i == 1) {
      w += a.w;
      s += a.w * a.x[c];
    }
  }
  return w > 0.0 ? s / w : 0.0;
}

std::function<Point(const Point&)> drift_fn(const DriftSpec& s, int d, MeasureView m) {
  switch (s.kind) {
    case DriftSpec::Kind::constant:
      return [c = s.c](const Point&) { return c; };
    case DriftSpec::Kind::affine:
      return [s, d](const Point& x) {
        Point out = s.c;
        for (int r = 0; r < d; ++r) {
          for (int k = 0; k < d; ++k) out[r] += s.a[r * kMaxDim + k] * x[k];
        }
        return out;
      };
    case DriftSpec::Kind::mean_reverting:
      return [s, d](const Point& x) {
        Point out{};
        for (int r = 0; r < d; ++r) out[r] = s.kappa * (s.theta[r] - x[r]);
        return out;
      };
    case DriftSpec::Kind::mean_field_attraction: {
      Point mean{};
      const bool any = surviving_mass(m) > 0.0;
      for (int r = 0; r < d; ++r) mean[r] = survivor_mean(m, r);
      return [kappa = s.kappa, mean, any, d](const Point& x) {
        Point out{};
        if (!any) return out;
        for (int r = 0; r < d; ++r) out[r] = kappa * (mean[r] - x[r]);
        return out;
      };
    }
  }
  throw std::invalid_argument("unknown drift kind");
}

std::function<Matrix(const Point&)> vol_fn(const VolSpec& s, int d) {
  switch (s.kind) {
    case VolSpec::Kind::constant:
      return [m = s.s](const Point&) { return m; };
    case VolSpec::Kind::proportional:
      return [s0 = s.s0, d](const Point& x) {
        Matrix out{};
        for (int r = 0; r < d; ++r) out[r * kMaxDim + r] = s0 * std::abs(x[r]);
        return out;
      };
  }
  throw std::invalid_argument("unknown volatility kind");
}

std::function<double(const Point&)> running_fn(const RunningSpec& s, int d) {
  switch (s.kind) {
    case RunningSpec::Kind::zero:
      return [](const Point&) { return 0.0; };
    case RunningSpec::Kind::constant:
      return [a = s.a](const Point&) { return a; };
    case RunningSpec::Kind::linear:
      return [s, d](const Point& x) {
        double v = s.a;
        for (int r = 0; r < d; ++r) v += s.c[r] * x[r];
        return v;
      };
  }
  throw std::invalid_argument("unknown running reward kind");
}

}  // namespace

TimeGrid::TimeGrid(double t0_, double horizon_, int n_) : t0(t0_), horizon(horizon_), n(n_) {
  if (n < 1) throw std::invalid_argument("time grid needs n >= 1");
  if (!(horizon > t0)) throw std::invalid_argument("time grid needs horizon > t0");
}

std::function<double(MeasureView)> make_terminal(const TerminalSpec& spec) {
  switch (spec.kind) {
    case TerminalSpec::Kind::expectation:
      return [psi = spec.psi](MeasureView m) { return expected_payoff(m, psi); };
    case TerminalSpec::Kind::mean_variance:
      return [lambda = spec.lambda](MeasureView m) { return mean_variance_g(m, lambda); };
    case TerminalSpec::Kind::neg_variance:
      // mean - 1/2 (2 Var) - mean = -Var
      return [](MeasureView m) {
        double s = 0.0;
        for (const Atom& a : m) s += a.w * a.x[0];
        return mean_variance_g(m, 2.0) - s;
      };
    case TerminalSpec::Kind::distortion:
      return [phi = spec.phi, psi = spec.psi](MeasureView m) { return distortion_g(m, phi, psi); };
    case TerminalSpec::Kind::neg_expected_shortfall:
      return [alpha = spec.alpha](MeasureView m) { return -expected_shortfall(m, alpha); };
    case TerminalSpec::Kind::squared_mean:
      return [psi = spec.psi](MeasureView m) {
        const double e = expected_payoff(m, psi);
        return e * e;
      };
  }
  throw std::invalid_argument("unknown terminal kind");
}

Problem make_problem(const ProblemSpec& spec) {
  if (spec.d < 1 || spec.d > kMaxDim) throw std::invalid_argument("problem dimension must be in [1,3]");
  if (!(spec.horizon > 0.0)) throw std::invalid_argument("problem horizon must be positive");
  Problem p;
  p.d = spec.d;
  p.horizon = spec.horizon;
  p.measure_dependent = spec.drift.kind == DriftSpec::Kind::mean_field_attraction;
  p.label = spec.label;
  const int d = spec.d;
  p.at = [spec, d](double, MeasureView m) {
    return LocalCoefficients{drift_fn(spec.drift, d, m), vol_fn(spec.vol, d), running_fn(spec.running, d)};
  };
  p.g = make_terminal(spec.terminal);
  return p;
}

DriftSpec constant_drift(double b) {
  DriftSpec s;
  s.kind = DriftSpec::Kind::constant;
  s.c = point1(b);
  return s;
}

DriftSpec gbm_drift(double b0) {
  DriftSpec s;
  s.kind = DriftSpec::Kind::affine;
  for (int r = 0; r < kMaxDim; ++r) s.a[r * kMaxDim + r] = b0;
  return s;
}

VolSpec constant_vol(double sig) {
  VolSpec s;
  s.kind = VolSpec::Kind::constant;
  for (int r = 0; r < kMaxDim; ++r) s.s[r * kMaxDim + r] = sig;
  return s;
}

VolSpec gbm_vol(double s0) {
  VolSpec s;
  s.kind = VolSpec::Kind::proportional;
  s.s0 = s0;
  return s;
}

bool gbm_truncation_ok(double b0, double s0, double x0, double horizon, double vanish_tol) {
  const double rate = b0 - 0.5 * s0 * s0;
  if (!(rate < 0.0)) throw std::domain_error("infinite horizon needs b0 - s0^2/2 < 0");
  return std::abs(x0) * std::exp(rate * horizon) < vanish_tol;
}

}  // namespace mfos
