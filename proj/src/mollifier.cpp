#include "mfos/mollifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfos/rng.hpp"
#include "parallel.hpp"

namespace mfos {
namespace {

void check(const MollifierParams& p) {
  if (p.n < 1) throw std::invalid_argument("mollifier n must be >= 1");
  if (p.z_samples < 1) throw std::invalid_argument("mollifier z_samples must be >= 1");
  if (!(p.step_c > 0.0)) throw std::invalid_argument("mollifier step constant must be positive");
}

// Acceptance probability exp(1 - 1/(1-u^2)) for the bump density on (-1, 1).
double bump_ratio(double u) { return std::exp(1.0 - 1.0 / (1.0 - u * u)); }

}  // namespace

double smoothstep(double u, double c) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::exp(-c / u);
  const double b = std::exp(-c / (1.0 - u));
  return a / (a + b);
}

double cutoff_h(double x, const MollifierParams& p) {
  const double n = p.n;
  return 1.0 - smoothstep((std::abs(x) - n) / (0.5 * n), p.step_c);
}

double partition_phi(int j, double x, const MollifierParams& p) {
  return smoothstep(1.0 - p.n * std::abs(x - static_cast<double>(j) / p.n), p.step_c);
}

std::vector<double> partition_weights(MeasureView mu, const MollifierParams& p, int flag) {
  check(p);
  const int jm = p.j_max();
  std::vector<double> psi(static_cast<std::size_t>(p.grid_size()), 0.0);
  for (const Atom& a : mu) {
    if (flag >= 0 && a.i != flag) continue;
    const double x = a.x[0];
    const double h = cutoff_h(x, p);
    if (h > 0.0) {
      const int j0 = static_cast<int>(std::floor(x * p.n));
      for (int j = j0; j <= j0 + 1; ++j) {
        if (j < -jm || j > jm) continue;
        psi[j + jm] += a.w * partition_phi(j, x, p) * h;
      }
    }
    psi[jm] += a.w * (1.0 - h);
  }
  return psi;
}

std::vector<double> sample_simplex(const MollifierParams& p, std::uint64_t seed, std::uint64_t sample) {
  check(p);
  const int jm = p.j_max();
  const double big_n = p.grid_size();
  const double radius = 1.0 / (big_n * big_n * big_n);
  const CounterRng rng(seed);
  std::vector<double> z(static_cast<std::size_t>(p.grid_size()), 0.0);
  double sum = 0.0;
  for (int j = -jm; j <= jm; ++j) {
    if (j == 0) continue;
    const auto slot = static_cast<std::uint32_t>(j + jm);
    double u = 0.0;
    for (std::uint32_t attempt = 0;; ++attempt) {
      const auto r = rng.uniform2(sample, slot, attempt);
      u = 2.0 * r[0] - 1.0;
      if (r[1] < bump_ratio(u)) break;
    }
    z[j + jm] = u * radius;
    sum += z[j + jm];
  }
  z[jm] = -sum;
  return z;
}

EmpiricalMeasure project_measure(const EmpiricalMeasure& m, std::span<const double> z, const MollifierParams& p) {
  check(p);
  if (m.dim() != 1) throw std::invalid_argument("project_measure needs d = 1");
  if (z.size() != static_cast<std::size_t>(p.grid_size())) throw std::invalid_argument("z has the wrong length");
  const int jm = p.j_max();
  const double big_n = p.grid_size();
  const double scale = big_n / (big_n + 1.0);
  const double dust = 1.0 / (big_n * big_n);
  std::vector<Atom> atoms;
  atoms.reserve(2 * z.size());
  for (int flag : {1, 0}) {
    double mass = 0.0;
    for (const Atom& a : m.atoms()) {
      if (a.i == flag) mass += a.w;
    }
    if (mass <= 0.0) continue;
    const auto psi = partition_weights(m.atoms(), p, flag);
    for (int j = -jm; j <= jm; ++j) {
      const double w = scale * (psi[j + jm] + mass * (dust + z[j + jm]));
      atoms.push_back(Atom{point1(static_cast<double>(j) / p.n), flag, w});
    }
  }
  return EmpiricalMeasure::from_atoms(1, std::move(atoms), 1e-9);
}

MollifiedValue mollify(const MeasureFunctional& u, const EmpiricalMeasure& m, const MollifierParams& p,
                       std::uint64_t seed) {
  check(p);
  std::vector<double> vals(static_cast<std::size_t>(p.z_samples));
  detail::parallel_for(vals.size(), [&](std::size_t s) {
    vals[s] = u(project_measure(m, sample_simplex(p, seed, s), p));
  });
  MollifiedValue out;
  double sum = 0.0;
  for (double v : vals) {
    if (!std::isfinite(v)) throw NumericalError("mollify: functional returned a non-finite value");
    sum += v;
  }
  out.value = sum / p.z_samples;
  if (p.z_samples > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - out.value) * (v - out.value);
    out.stderr_ = std::sqrt(ss / (p.z_samples - 1) / p.z_samples);
  }
  return out;
}

ProbeReport monotonicity_probe(const MeasureFunctional& u, std::span<const EmpiricalMeasure> bases,
                               const MollifierParams& p, int trials, std::uint64_t seed, bool identity_maps) {
  if (bases.empty()) throw std::invalid_argument("monotonicity_probe needs base measures");
  ProbeReport rep;
  const CounterRng rng(derive_seed(seed, 0x9B0Eu));
  for (int t = 0; t < trials; ++t) {
    const EmpiricalMeasure& m = bases[static_cast<std::size_t>(t) % bases.size()];
    std::vector<Point> sites;
    std::vector<double> vals;
    for (const Atom& a : m.atoms()) {
      if (a.i != 1) continue;
      sites.push_back(a.x);
      vals.push_back(identity_maps ? 1.0 : rng.uniform2(sites.size(), static_cast<std::uint32_t>(t), 0)[0]);
    }
    const EmpiricalMeasure mp = apply_stop(m, SiteStopMap(m.dim(), sites, vals));
    const std::uint64_t draw_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    const double hi = mollify(u, m, p, draw_seed).value;
    const double lo = mollify(u, mp, p, draw_seed).value;
    ++rep.trials;
    rep.max_excess = t == 0 ? lo - hi : std::max(rep.max_excess, lo - hi);
    if (lo > hi + 1e-12) ++rep.violations;
  }
  return rep;
}

MeasureFunctional builtin_functional(const std::string& name) {
  if (name == "linear") {
    return [](const EmpiricalMeasure& m) {
      double s = 0.0;
      for (const Atom& a : m.atoms()) {
        const double k = std::sin(a.x[0]);
        s += a.w * (a.i == 1 ? 1.25 * k + 0.5 : k);
      }
      return s;
    };
  }
  if (name == "nonlinear") {
    return [](const EmpiricalMeasure& m) {
      double first = 0.0, second = 0.0;
      for (const Atom& a : m.atoms()) {
        if (a.i == 1) first += a.w * (2.0 + std::sin(a.x[0]));
        second += a.w * std::atan(a.x[0]);
      }
      return first * first + second;
    };
  }
  if (name == "survivor_mass") return [](const EmpiricalMeasure& m) { return surviving_mass(m.atoms()); };
  if (name == "survivor_first_moment") {
    return [](const EmpiricalMeasure& m) { return integrate(m.atoms(), [](const Point& x) { return x[0]; }, 1); };
  }
  throw std::invalid_argument("unknown functional '" + name + "'");
}

std::vector<EmpiricalMeasure> compact_test_family(std::uint64_t seed, int atoms) {
  const CounterRng rng(seed);
  std::vector<EmpiricalMeasure> fam;
  for (std::uint32_t k = 0; k < 10; ++k) {
    std::vector<Site> pts;
    std::vector<double> w;
    for (int a = 0; a < atoms; ++a) {
      const auto r = rng.uniform2(static_cast<std::uint64_t>(a), k, 0);
      const auto s = rng.uniform2(static_cast<std::uint64_t>(a), k, 1);
      pts.push_back(Site{point1(-1.5 + 3.0 * r[0]), s[0] < 0.6 ? 1 : 0});
      w.push_back(0.2 + s[1]);
    }
    fam.push_back(make_empirical(1, pts, w));
  }
  return fam;
}

}  // namespace mfos
