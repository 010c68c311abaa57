#include "mfos/measure.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace mfos {
namespace {

bool lex_less(const Point& a, const Point& b, int dim) {
  for (int c = 0; c < dim; ++c) {
    if (a[c] < b[c]) return true;
    if (a[c] > b[c]) return false;
  }
  return false;
}

bool close(const Point& a, const Point& b, int dim, double tol) {
  for (int c = 0; c < dim; ++c) {
    if (std::abs(a[c] - b[c]) > tol) return false;
  }
  return true;
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
}

// Merge atoms with equal (x, i) up to tol, keeping first-occurrence order.
std::vector<Atom> merge_stable(int dim, std::vector<Atom> atoms) {
  const std::size_t n = atoms.size();
  if (n < 2) return atoms;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (atoms[a].i != atoms[b].i) return atoms[a].i < atoms[b].i;
    return lex_less(atoms[a].x, atoms[b].x, dim);
  });
  std::vector<std::size_t> owner(n);
  std::vector<bool> keep(n, false);
  std::size_t head = order[0];
  std::size_t rep = head;  // first occurrence in the group
  std::vector<std::size_t> group{head};
  auto flush = [&]() {
    rep = *std::min_element(group.begin(), group.end());
    keep[rep] = true;
    for (std::size_t g : group) owner[g] = rep;
  };
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t cur = order[k];
    if (atoms[cur].i == atoms[head].i &&
        close(atoms[cur].x, atoms[head].x, dim, EmpiricalMeasure::kMergeTol)) {
      group.push_back(cur);
    } else {
      flush();
      head = cur;
      group.assign(1, cur);
    }
  }
  flush();
  std::vector<double> mass(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) mass[owner[k]] += atoms[k].w;
  std::vector<Atom> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!keep[k]) continue;
    Atom a = atoms[k];
    a.w = mass[k];
    out.push_back(a);
  }
  return out;
}

}  // namespace

EmpiricalMeasure EmpiricalMeasure::from_atoms(int dim, std::vector<Atom> atoms, double mass_tol) {
  check_dim(dim);
  std::vector<Atom> kept;
  kept.reserve(atoms.size());
  double sum = 0.0;
  for (Atom a : atoms) {
    if (!std::isfinite(a.w) || a.w < 0.0) throw std::invalid_argument("atom weight must be finite and >= 0");
    if (a.i != 0 && a.i != 1) throw std::invalid_argument("survival flag must be 0 or 1");
    for (int c = 0; c < dim; ++c) {
      if (!std::isfinite(a.x[c])) throw std::invalid_argument("atom position must be finite");
    }
    for (int c = dim; c < kMaxDim; ++c) a.x[c] = 0.0;
    if (a.w == 0.0) continue;
    sum += a.w;
    kept.push_back(a);
  }
  if (kept.empty()) throw std::invalid_argument("measure has no atoms with positive weight");
  if (std::abs(sum - 1.0) > mass_tol) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "atom weights sum to " << sum << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
  return EmpiricalMeasure(dim, merge_stable(dim, std::move(kept)));
}

SiteStopMap::SiteStopMap(int dim, std::vector<Point> sites, std::vector<double> values, double fallback)
    : dim_(dim), fallback_(fallback) {
  if (sites.size() != values.size()) throw std::invalid_argument("SiteStopMap: sites/values size mismatch");
  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return lex_less(sites[a], sites[b], dim_); });
  for (std::size_t k : order) {
    sites_.push_back(sites[k]);
    values_.push_back(values[k]);
  }
}

double SiteStopMap::operator()(const Point& x) const {
  Point lo = x;
  for (int c = 0; c < dim_; ++c) lo[c] -= EmpiricalMeasure::kMergeTol;
  auto it = std::lower_bound(sites_.begin(), sites_.end(), lo,
                             [&](const Point& a, const Point& b) { return lex_less(a, b, dim_); });
  for (; it != sites_.end(); ++it) {
    if (close(*it, x, dim_, EmpiricalMeasure::kMergeTol)) return values_[it - sites_.begin()];
    if ((*it)[0] > x[0] + EmpiricalMeasure::kMergeTol) break;
  }
  return fallback_;
}

EmpiricalMeasure make_empirical(int dim, std::span<const Site> points, std::span<const double> weights) {
  check_dim(dim);
  if (points.empty()) throw std::invalid_argument("make_empirical: no points");
  if (!weights.empty() && weights.size() != points.size()) {
    throw std::invalid_argument("make_empirical: weights and points differ in length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("make_empirical: weights must be positive");
    total += w;
  }
  std::vector<Atom> atoms;
  atoms.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    atoms.push_back(Atom{points[k].x, points[k].i, w / total});
  }
  return EmpiricalMeasure::from_atoms(dim, std::move(atoms), 1e-9);
}

EmpiricalMeasure make_empirical_1d(std::span<const double> xs, std::span<const int> flags,
                                   std::span<const double> weights) {
  if (xs.size() != flags.size()) throw std::invalid_argument("make_empirical_1d: xs and flags differ in length");
  std::vector<Site> sites;
  sites.reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) sites.push_back(Site{point1(xs[k]), flags[k]});
  return make_empirical(1, sites, weights);
}

double total_mass(MeasureView m) {
  double s = 0.0;
  for (const Atom& a : m) s += a.w;
  return s;
}

double surviving_mass(MeasureView m) {
  double s = 0.0;
  for (const Atom& a : m) {
    if (a.i == 1) s += a.w;
  }
  return s;
}

EmpiricalMeasure apply_stop(const EmpiricalMeasure& m, const StopMap& p) {
  std::vector<Atom> out;
  out.reserve(2 * m.size());
  for (const Atom& a : m.atoms()) {
    if (a.i == 0) {
      out.push_back(a);
      continue;
    }
    const double q = p(a.x);
    if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("stop map value outside [0,1]");
    out.push_back(Atom{a.x, 1, a.w * q});
    out.push_back(Atom{a.x, 0, a.w * (1.0 - q)});
  }
  return EmpiricalMeasure::from_atoms(m.dim(), std::move(out), 1e-9);
}

std::optional<SiteStopMap> preceq_density(const EmpiricalMeasure& m_prime, const EmpiricalMeasure& m,
                                          double tol) {
  if (m_prime.dim() != m.dim()) throw std::invalid_argument("preceq_density: dimension mismatch");
  const int dim = m.dim();
  // Per-site masses (total and surviving) for both measures.
  struct SiteMass {
    Point x;
    double total_m = 0, surv_m = 0, total_mp = 0, surv_mp = 0;
  };
  std::vector<SiteMass> table;
  auto locate = [&](const Point& x) -> SiteMass& {
    for (SiteMass& s : table) {
      if (close(s.x, x, dim, std::max(tol, EmpiricalMeasure::kMergeTol))) return s;
    }
    table.push_back(SiteMass{x});
    return table.back();
  };
  for (const Atom& a : m.atoms()) {
    SiteMass& s = locate(a.x);
    s.total_m += a.w;
    if (a.i == 1) s.surv_m += a.w;
  }
  for (const Atom& a : m_prime.atoms()) {
    SiteMass& s = locate(a.x);
    s.total_mp += a.w;
    if (a.i == 1) s.surv_mp += a.w;
  }
  std::vector<Point> sites;
  std::vector<double> values;
  for (const SiteMass& s : table) {
    if (std::abs(s.total_m - s.total_mp) > tol) return std::nullopt;
    if (s.surv_mp > s.surv_m + tol) return std::nullopt;
    if (s.surv_m <= tol) {
      if (s.surv_mp > tol) return std::nullopt;
      continue;
    }
    sites.push_back(s.x);
    values.push_back(std::clamp(s.surv_mp / s.surv_m, 0.0, 1.0));
  }
  return SiteStopMap(dim, std::move(sites), std::move(values), 1.0);
}

EmpiricalMeasure x_marginal(const EmpiricalMeasure& m) {
  std::vector<Atom> out(m.atoms().begin(), m.atoms().end());
  for (Atom& a : out) a.i = 0;
  return EmpiricalMeasure::from_atoms(m.dim(), std::move(out), 1e-9);
}

EmpiricalMeasure bump(const EmpiricalMeasure& m, const Atom& y, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("bump: eps must lie in (0,1)");
  std::vector<Atom> out(m.atoms().begin(), m.atoms().end());
  for (Atom& a : out) a.w *= (1.0 - eps);
  out.push_back(Atom{y.x, y.i, eps});
  return EmpiricalMeasure::from_atoms(m.dim(), std::move(out), 1e-9);
}

bool approx_equal(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double tol) {
  if (a.dim() != b.dim() || a.size() != b.size()) return false;
  const int dim = a.dim();
  auto sorted = [dim](MeasureView v) {
    std::vector<Atom> s(v.begin(), v.end());
    std::sort(s.begin(), s.end(), [dim](const Atom& p, const Atom& q) {
      if (p.i != q.i) return p.i < q.i;
      return lex_less(p.x, q.x, dim);
    });
    return s;
  };
  const auto sa = sorted(a.atoms());
  const auto sb = sorted(b.atoms());
  for (std::size_t k = 0; k < sa.size(); ++k) {
    if (sa[k].i != sb[k].i || !close(sa[k].x, sb[k].x, dim, tol) || std::abs(sa[k].w - sb[k].w) > tol) {
      return false;
    }
  }
  return true;
}

double integrate(MeasureView m, const std::function<double(const Point&)>& h, int flag) {
  double s = 0.0;
  for (const Atom& a : m) {
    if (flag >= 0 && a.i != flag) continue;
    s += a.w * h(a.x);
  }
  return s;
}

void write_measure_csv(std::ostream& out, const EmpiricalMeasure& m) {
  for (int c = 0; c < m.dim(); ++c) out << 'x' << c << ',';
  out << "i,w\n";
  out << std::setprecision(17);
  for (const Atom& a : m.atoms()) {
    for (int c = 0; c < m.dim(); ++c) out << a.x[c] << ',';
    out << a.i << ',' << a.w << '\n';
  }
}

EmpiricalMeasure read_measure_csv(std::istream& in) {
  std::string line;
  // Leading '#' lines carry provenance.
  do {
    if (!std::getline(in, line)) throw std::invalid_argument("measure csv: missing header");
  } while (!line.empty() && line[0] == '#');
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const int dim = static_cast<int>(header.size()) - 2;
  if (dim < 1 || dim > kMaxDim || header[dim] != "i" || header[dim + 1] != "w") {
    throw std::invalid_argument("measure csv: header must be x0,...,x{d-1},i,w");
  }
  for (int c = 0; c < dim; ++c) {
    if (header[c] != "x" + std::to_string(c)) throw std::invalid_argument("measure csv: bad column " + header[c]);
  }
  std::vector<Site> sites;
  std::vector<double> weights;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    try {
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("measure csv: unparsable number on row " + std::to_string(row));
    }
    if (static_cast<int>(vals.size()) != dim + 2) {
      throw std::invalid_argument("measure csv: wrong column count on row " + std::to_string(row));
    }
    Site s;
    for (int c = 0; c < dim; ++c) s.x[c] = vals[c];
    s.i = static_cast<int>(vals[dim]);
    if (vals[dim] != 0.0 && vals[dim] != 1.0) {
      throw std::invalid_argument("measure csv: flag must be 0 or 1 on row " + std::to_string(row));
    }
    sites.push_back(s);
    weights.push_back(vals[dim + 1]);
  }
  return make_empirical(dim, sites, weights);
}

}  // namespace mfos
