#pragma once

#include <string>

#include "mfos/measure.hpp"

namespace mfos {

/// Scalar utility / payoff psi: R -> R, read on the first coordinate.
struct Payoff {
  enum class Kind { polynomial, put, call, abs, sqrt1px2 };
  Kind kind = Kind::polynomial;
  double a = 0.0;       // polynomial: a + c x + q x^2
  double c = 1.0;
  double q = 0.0;
  double strike = 0.0;  // put: (K - x)^+, call: (x - K)^+

  double operator()(double x) const;
  /// Global Lipschitz constant (infinity when q != 0).
  double lipschitz() const;

  static Payoff identity() { return {}; }
  static Payoff quadratic(double a, double c, double q) { return {Kind::polynomial, a, c, q, 0.0}; }
  static Payoff put(double k) { return {Kind::put, 0.0, 0.0, 0.0, k}; }
  static Payoff call(double k) { return {Kind::call, 0.0, 0.0, 0.0, k}; }
};

/// Probability distortion phi: [0,1] -> [0,1], increasing, phi(0)=0, phi(1)=1.
struct Distortion {
  enum class Kind { identity, power, exponential };
  Kind kind = Kind::power;
  double param = 0.7;  // power: u^param; exponential: (1-e^{-k u})/(1-e^{-k})

  double operator()(double u) const;
  double lipschitz() const;
};

/// sum w psi(x) over every atom (both flags).
double expected_payoff(MeasureView m, const Payoff& psi);

/// mean - lambda/2 Var of the x-marginal (first coordinate).
double mean_variance_g(MeasureView m, double lambda);

/// inf_beta { beta + E(X - beta)^+ / (1 - alpha) }, minimized exactly over atoms.
/// Returns the value and writes the minimizing atom location to *beta_star.
double expected_shortfall(MeasureView m, double alpha, double* beta_star = nullptr);

/// Upper-tail quantile average (1/(1-alpha)) int_alpha^1 q_gamma d gamma with
/// q_gamma = inf{z : F(z) > gamma}, computed from sorted atoms.
double expected_shortfall_quantile(MeasureView m, double alpha);

/// int_0^inf phi(mu(psi >= z)) dz for psi >= 0 on atoms: sort psi descending and
/// sum psi_(k) [phi(P_k) - phi(P_{k-1})] with P_k the cumulative tail mass.
/// Throws std::invalid_argument on a negative psi value.
double distortion_g(MeasureView m, const Distortion& phi, const Payoff& psi);

/// distortion_g by direct layer-cake integration: a uniform grid of `cells`
/// on [0, max psi] refined at every payoff value, tail mass at cell midpoints.
double distortion_g_quadrature(MeasureView m, const Distortion& phi, const Payoff& psi, int cells = 20000);

}  // namespace mfos
