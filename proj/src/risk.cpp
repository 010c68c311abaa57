#include "mfos/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mfos {
namespace {

std::vector<std::pair<double, double>> sorted_first_coord(MeasureView m) {
  std::vector<std::pair<double, double>> v;
  v.reserve(m.size());
  double tot = 0.0;
  for (const Atom& a : m) {
    if (a.w > 0.0) {
      v.emplace_back(a.x[0], a.w);
      tot += a.w;
    }
  }
  if (v.empty() || !(tot > 0.0)) throw std::invalid_argument("risk functional of an empty measure");
  for (auto& p : v) p.second /= tot;
  std::sort(v.begin(), v.end());
  return v;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}

}  // namespace

double Payoff::operator()(double x) const {
  switch (kind) {
    case Kind::polynomial: return a + c * x + q * x * x;
    case Kind::put: return std::max(strike - x, 0.0);
    case Kind::call: return std::max(x - strike, 0.0);
    case Kind::abs: return std::abs(x);
    case Kind::sqrt1px2: return std::sqrt(1.0 + x * x);
  }
  return 0.0;
}

double Payoff::lipschitz() const {
  switch (kind) {
    case Kind::polynomial: return q != 0.0 ? std::numeric_limits<double>::infinity() : std::abs(c);
    default: return 1.0;
  }
}

double Distortion::operator()(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  switch (kind) {
    case Kind::identity: return u;
    case Kind::power: return std::pow(u, param);
    case Kind::exponential: return -std::expm1(-param * u) / -std::expm1(-param);
  }
  return u;
}

double Distortion::lipschitz() const {
  switch (kind) {
    case Kind::identity: return 1.0;
    case Kind::power: return param >= 1.0 ? param : std::numeric_limits<double>::infinity();
    case Kind::exponential: return param / -std::expm1(-param);
  }
  return 1.0;
}

double expected_payoff(MeasureView m, const Payoff& psi) {
  double s = 0.0;
  for (const Atom& a : m) s += a.w * psi(a.x[0]);
  return s;
}

double mean_variance_g(MeasureView m, double lambda) {
  double s0 = 0.0, s1 = 0.0;
  for (const Atom& a : m) {
    s0 += a.w;
    s1 += a.w * a.x[0];
  }
  const double mean = s1 / s0;
  // Centered second pass keeps Var >= 0 for tightly clustered atoms.
  double var = 0.0;
  for (const Atom& a : m) var += a.w * (a.x[0] - mean) * (a.x[0] - mean);
  var /= s0;
  return mean - 0.5 * lambda * var;
}

double expected_shortfall(MeasureView m, double alpha, double* beta_star) {
  check_alpha(alpha);
  const auto v = sorted_first_coord(m);
  // Suffix sums of w and w x over atoms strictly above the candidate beta.
  const std::size_t n = v.size();
  std::vector<double> tail_w(n + 1, 0.0), tail_wx(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    tail_w[k] = tail_w[k + 1] + v[k].second;
    tail_wx[k] = tail_wx[k + 1] + v[k].second * v[k].first;
  }
  double best = std::numeric_limits<double>::infinity();
  double arg = v.front().first;
  for (std::size_t k = 0; k < n; ++k) {
    const double beta = v[k].first;
    std::size_t j = k + 1;
    while (j < n && v[j].first <= beta) ++j;
    const double excess = tail_wx[j] - beta * tail_w[j];
    const double obj = beta + std::max(0.0, excess) / (1.0 - alpha);
    if (obj < best) {
      best = obj;
      arg = beta;
    }
  }
  if (beta_star) *beta_star = arg;
  return best;
}

double expected_shortfall_quantile(MeasureView m, double alpha) {
  check_alpha(alpha);
  const auto v = sorted_first_coord(m);
  double cum = 0.0, acc = 0.0;
  for (const auto& [x, w] : v) {
    const double lo = std::max(cum, alpha);
    const double hi = std::min(cum + w, 1.0);
    if (hi > lo) acc += x * (hi - lo);
    cum += w;
  }
  // Rounding can leave the last interval short of 1.
  if (cum < 1.0) acc += v.back().first * (1.0 - std::max(cum, alpha));
  return acc / (1.0 - alpha);
}

double distortion_g(MeasureView m, const Distortion& phi, const Payoff& psi) {
  std::vector<std::pair<double, double>> v;
  v.reserve(m.size());
  for (const Atom& a : m) {
    if (a.w <= 0.0) continue;
    const double y = psi(a.x[0]);
    if (y < 0.0) throw std::invalid_argument("distortion_g: psi must be nonnegative");
    v.emplace_back(y, a.w);
  }
  std::sort(v.begin(), v.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  double tail = 0.0, prev = 0.0, g = 0.0;
  for (const auto& [y, w] : v) {
    tail += w;
    const double cur = phi(tail);
    g += y * (cur - prev);
    prev = cur;
  }
  return g;
}

double distortion_g_quadrature(MeasureView m, const Distortion& phi, const Payoff& psi, int cells) {
  if (cells < 1) throw std::invalid_argument("quadrature needs at least one cell");
  std::vector<double> pts;
  double top = 0.0;
  for (const Atom& a : m) {
    const double v = psi(a.x[0]);
    if (v < 0.0) throw std::invalid_argument("distortion reward needs psi >= 0");
    pts.push_back(v);
    top = std::max(top, v);
  }
  for (int k = 0; k <= cells; ++k) pts.push_back(top * k / cells);
  std::sort(pts.begin(), pts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    if (pts[k + 1] <= pts[k]) continue;
    const double z = 0.5 * (pts[k] + pts[k + 1]);
    double tail = 0.0;
    for (const Atom& a : m) {
      if (psi(a.x[0]) >= z) tail += a.w;
    }
    s += (pts[k + 1] - pts[k]) * phi(tail);
  }
  return s;
}

}  // namespace mfos
