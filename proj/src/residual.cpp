#include "mfos/residual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfos/rng.hpp"
#include "parallel.hpp"

namespace mfos {
namespace {

void check(const BumpConfig& c) {
  if (!(c.eps > 0.0 && c.eps <= 0.5)) throw std::invalid_argument("bump eps must lie in (0, 0.5]");
  if (!(c.h_rel > 0.0) || !(c.dt_rel > 0.0)) throw std::invalid_argument("finite-difference steps must be positive");
}

double finite(double v) {
  if (!std::isfinite(v)) throw NumericalError("value functional returned a non-finite value");
  return v;
}

// Batch of bump quotients at points y sharing one base value u(t, m).
class QuotientBatch {
 public:
  QuotientBatch(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const BumpConfig& cfg)
      : u_(u), t_(t), m_(m), cfg_(cfg) {}

  std::size_t add(const Atom& y) {
    ys_.push_back(y);
    return ys_.size() - 1;
  }

  void run(double u0) {
    const std::size_t per = cfg_.richardson ? 2 : 1;
    std::vector<double> raw(ys_.size() * per);
    detail::parallel_for(raw.size(), [&](std::size_t j) {
      const double e = j % per == 0 ? cfg_.eps : 0.5 * cfg_.eps;
      const Atom y{ys_[j / per].x, ys_[j / per].i, 1.0};
      raw[j] = (finite(u_(t_, bump(m_, y, e))) - u0) / e;
    });
    q_.resize(ys_.size());
    for (std::size_t k = 0; k < ys_.size(); ++k) {
      q_[k] = cfg_.richardson ? 2.0 * raw[k * per + 1] - raw[k * per] : raw[k * per];
    }
  }

  double operator[](std::size_t k) const { return q_[k]; }

 private:
  const ValueFunctional& u_;
  double t_;
  const EmpiricalMeasure& m_;
  const BumpConfig& cfg_;
  std::vector<Atom> ys_;
  std::vector<double> q_;
};

struct Need {
  bool delta = true;
  bool di = true;
  bool space = true;
};

DerivativeEstimate estimate(const ValueFunctional& u, double t, const EmpiricalMeasure& m, double horizon,
                            const BumpConfig& cfg, Need need) {
  check(cfg);
  const int d = m.dim();
  DerivativeEstimate est;
  est.eps = cfg.eps;
  est.h_rel = cfg.h_rel;
  est.time_step = cfg.dt_rel * horizon;

  // u(t, m), then the time neighbours.
  const double ts = est.time_step;
  const double t_lo = t - ts >= 0.0 ? t - ts : t;
  const double t_hi = t + ts <= horizon ? t + ts : t;
  double base[3] = {};
  const double times[3] = {t, t_lo, t_hi};
  detail::parallel_for(3, [&](std::size_t j) { base[j] = finite(u(times[j], m)); });
  const double u0 = base[0];
  est.dt = t_hi > t_lo ? (base[2] - base[1]) / (t_hi - t_lo) : 0.0;

  QuotientBatch batch(u, t, m, cfg);
  std::vector<std::size_t> atom_q;
  if (need.delta) {
    for (const Atom& a : m.atoms()) atom_q.push_back(batch.add(a));
  }
  struct SurvivorSlots {
    std::size_t on = 0, off = 0;
    std::size_t plus1[kMaxDim]{}, minus1[kMaxDim]{}, plus3[kMaxDim]{}, minus3[kMaxDim]{};
    std::size_t mixed[kMaxDim][kMaxDim][4]{};
    double h = 0.0;
  };
  std::vector<SurvivorSlots> slots;
  for (const Atom& a : m.atoms()) {
    if (a.i != 1) continue;
    est.survivors.push_back(a.x);
    est.survivor_w.push_back(a.w);
    SurvivorSlots s;
    if (need.di) {
      s.on = batch.add(Atom{a.x, 1, 1.0});
      s.off = batch.add(Atom{a.x, 0, 1.0});
    }
    if (need.space) {
      double r = 0.0;
      for (int c = 0; c < d; ++c) r = std::max(r, std::abs(a.x[c]));
      s.h = cfg.h_rel * (1.0 + r);
      auto at = [&](int c, double off) {
        Point p = a.x;
        p[c] += off;
        return batch.add(Atom{p, 1, 1.0});
      };
      for (int c = 0; c < d; ++c) {
        s.plus1[c] = at(c, s.h);
        s.minus1[c] = at(c, -s.h);
        s.plus3[c] = at(c, 3.0 * s.h);
        s.minus3[c] = at(c, -3.0 * s.h);
        for (int e = c + 1; e < d; ++e) {
          int k = 0;
          for (double sc : {1.0, -1.0}) {
            for (double se : {1.0, -1.0}) {
              Point p = a.x;
              p[c] += sc * s.h;
              p[e] += se * s.h;
              s.mixed[c][e][k++] = batch.add(Atom{p, 1, 1.0});
            }
          }
        }
      }
    }
    slots.push_back(s);
  }
  batch.run(u0);

  if (need.delta) {
    double mean = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      est.delta_m.push_back(batch[atom_q[k]]);
      mean += m[k].w * est.delta_m.back();
    }
    for (double& v : est.delta_m) v -= mean;
  }
  for (const SurvivorSlots& s : slots) {
    if (need.di) est.d_i.push_back(batch[s.on] - batch[s.off]);
    if (!need.space) continue;
    Point g{};
    Matrix hs{};
    const double h = s.h;
    for (int c = 0; c < d; ++c) {
      g[c] = (batch[s.plus1[c]] - batch[s.minus1[c]]) / (2.0 * h);
      hs[c * kMaxDim + c] =
          (batch[s.plus3[c]] + batch[s.minus3[c]] - batch[s.plus1[c]] - batch[s.minus1[c]]) / (8.0 * h * h);
      for (int e = c + 1; e < d; ++e) {
        const auto& q = s.mixed[c][e];
        const double v = (batch[q[0]] - batch[q[1]] - batch[q[2]] + batch[q[3]]) / (4.0 * h * h);
        hs[c * kMaxDim + e] = v;
        hs[e * kMaxDim + c] = v;
      }
    }
    est.dx_delta.push_back(g);
    est.dxx_delta.push_back(hs);
  }
  return est;
}

double generator_from(const DerivativeEstimate& est, double t, const EmpiricalMeasure& m, const Problem& problem) {
  const int d = problem.d;
  const LocalCoefficients c = problem.at(t, m.atoms());
  double s = est.dt;
  for (std::size_t k = 0; k < est.survivors.size(); ++k) {
    const Point& x = est.survivors[k];
    const Point b = c.drift(x);
    const Matrix sig = c.vol(x);
    double term = 0.0;
    for (int i = 0; i < d; ++i) {
      term += b[i] * est.dx_delta[k][i];
      for (int j = 0; j < d; ++j) {
        double a = 0.0;
        for (int l = 0; l < d; ++l) a += sig[i * kMaxDim + l] * sig[j * kMaxDim + l];
        term += 0.5 * a * est.dxx_delta[k][i * kMaxDim + j];
      }
    }
    s += est.survivor_w[k] * term;
  }
  return finite(s);
}

}  // namespace

double linear_derivative(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Atom& y,
                         const BumpConfig& cfg) {
  check(cfg);
  QuotientBatch batch(u, t, m, cfg);
  batch.add(y);
  batch.run(finite(u(t, m)));
  return batch[0];
}

DerivativeEstimate derivative_estimate(const ValueFunctional& u, double t, const EmpiricalMeasure& m, double horizon,
                                       const BumpConfig& cfg) {
  return estimate(u, t, m, horizon, cfg, Need{});
}

double d_i(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Point& x, const BumpConfig& cfg) {
  check(cfg);
  QuotientBatch batch(u, t, m, cfg);
  batch.add(Atom{x, 1, 1.0});
  batch.add(Atom{x, 0, 1.0});
  batch.run(finite(u(t, m)));
  return batch[0] - batch[1];
}

double generator(const ValueFunctional& u, double t, const EmpiricalMeasure& m, const Problem& problem,
                 const BumpConfig& cfg) {
  if (problem.d != m.dim()) throw std::invalid_argument("generator: problem and measure dimensions differ");
  const DerivativeEstimate est = estimate(u, t, m, problem.horizon, cfg, Need{false, false, true});
  return generator_from(est, t, m, problem);
}

double running_integral(double t, const EmpiricalMeasure& m, const Problem& problem) {
  const LocalCoefficients c = problem.at(t, m.atoms());
  double s = 0.0;
  for (const Atom& a : m.atoms()) {
    if (a.i == 1) s += a.w * c.running(a.x);
  }
  return s;
}

ResidualReport obstacle_residual(const ValueFunctional& u, double t, const EmpiricalMeasure& m,
                                 const Problem& problem, const ResidualConfig& cfg) {
  if (problem.d != m.dim()) throw std::invalid_argument("obstacle_residual: problem and measure dimensions differ");
  if (cfg.stop_maps < 0 || cfg.jitters < 0) throw std::invalid_argument("residual sample counts must be >= 0");
  const int d = m.dim();
  const CounterRng rng(cfg.seed);

  std::vector<Point> sites;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Atom& a : m.atoms()) {
    if (a.i != 1) continue;
    sites.push_back(a.x);
    lo = std::min(lo, a.x[0]);
    hi = std::max(hi, a.x[0]);
  }

  // Candidates m' <= m: p = 1 (m itself), p = 0, then random site maps and
  // random thresholds on the first coordinate.
  std::vector<EmpiricalMeasure> cands{m};
  if (!sites.empty()) {
    cands.push_back(apply_stop(m, [](const Point&) { return 0.0; }));
    for (int r = 0; r < cfg.stop_maps; ++r) {
      std::vector<double> vals;
      const double theta = lo + (hi - lo) * rng.uniform2(0, static_cast<std::uint32_t>(r), 1)[0];
      for (std::size_t k = 0; k < sites.size(); ++k) {
        const double v = rng.uniform2(k + 1, static_cast<std::uint32_t>(r), 0)[0];
        vals.push_back(r % 2 == 0 ? v : (sites[k][0] <= theta ? 0.0 : 1.0));
      }
      cands.push_back(apply_stop(m, SiteStopMap(d, sites, vals)));
    }
  }
  std::vector<double> uc(cands.size());
  detail::parallel_for(cands.size(), [&](std::size_t k) { uc[k] = finite(u(t, cands[k])); });

  ResidualReport rep;
  rep.interior_term = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (k > 0 && uc[k] < uc[0] - cfg.keep_tol) continue;
    ++rep.admissible;
    const double gen = generator(u, t, cands[k], problem, cfg.bumps);
    rep.interior_term = std::min(rep.interior_term, -(gen + running_integral(t, cands[k], problem)));
  }

  if (!sites.empty()) {
    const DerivativeEstimate est = estimate(u, t, m, problem.horizon, cfg.bumps, Need{false, true, false});
    double dmin = *std::min_element(est.d_i.begin(), est.d_i.end());
    const CounterRng jr(derive_seed(cfg.seed, 0x717));
    for (int j = 0; j < cfg.jitters; ++j) {
      std::vector<Atom> atoms(m.atoms().begin(), m.atoms().end());
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        for (int c = 0; c < d; ++c) {
          const double v = jr.uniform2(k, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(c))[0];
          atoms[k].x[c] += cfg.jitter_rel * (1.0 + std::abs(atoms[k].x[c])) * (2.0 * v - 1.0);
        }
      }
      const EmpiricalMeasure mj = EmpiricalMeasure::from_atoms(d, std::move(atoms), 1e-9);
      const DerivativeEstimate ej = estimate(u, t, mj, problem.horizon, cfg.bumps, Need{false, true, false});
      if (!ej.d_i.empty()) dmin = std::min(dmin, *std::min_element(ej.d_i.begin(), ej.d_i.end()));
    }
    rep.d_i_min = dmin;
    rep.residual = std::min(rep.interior_term, dmin);
  } else {
    rep.residual = rep.interior_term;
  }
  return rep;
}

Region classify(const ResidualReport& r, double gen_tol, double di_tol) {
  if (!r.d_i_min) return Region::undetermined;
  if (std::abs(*r.d_i_min) <= di_tol) return Region::exercise;
  if (std::abs(r.interior_term) <= gen_tol && *r.d_i_min > di_tol) return Region::continuation;
  return Region::undetermined;
}

}  // namespace mfos
