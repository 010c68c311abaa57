#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mfos/types.hpp"

namespace mfos {

/// One weighted point of the extended state space R^d x {0,1}.
/// `i == 1` marks a surviving (not yet stopped) particle.
struct Atom {
  Point x{};
  int i = 1;
  double w = 0.0;
};

/// Non-owning view over the atoms of a (possibly unmerged) probability measure.
/// Measure functionals take views so simulation snapshots need no copy.
using MeasureView = std::span<const Atom>;

/// A spatial location together with its survival flag.
struct Site {
  Point x{};
  int i = 1;
};

/// Finite probability measure on R^d x {0,1}.
///
/// Immutable after construction. Atoms sharing (x, i) up to 1e-12 are merged,
/// keeping the position of the first occurrence, so particle indices derived
/// from atom order stay stable when atoms are appended to an existing measure.
class EmpiricalMeasure {
 public:
  static constexpr double kMergeTol = 1e-12;
  static constexpr double kMassTol = 1e-12;

  EmpiricalMeasure() = default;

  /// Builds from atoms whose weights already sum to one (within `mass_tol`).
  /// Zero weights are pruned; negative or non-finite weights throw.
  static EmpiricalMeasure from_atoms(int dim, std::vector<Atom> atoms,
                                     double mass_tol = kMassTol);

  int dim() const { return dim_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  MeasureView atoms() const { return atoms_; }
  const Atom& operator[](std::size_t k) const { return atoms_[k]; }
  operator MeasureView() const { return atoms_; }  // NOLINT(google-explicit-constructor)

 private:
  EmpiricalMeasure(int dim, std::vector<Atom> atoms) : dim_(dim), atoms_(std::move(atoms)) {}

  int dim_ = 1;
  std::vector<Atom> atoms_;
};

/// Conditional survival probability p(x) in [0,1] of a relaxed stop.
using StopMap = std::function<double(const Point&)>;

/// Stop map given by a finite table of sites; off-table points get `fallback`.
class SiteStopMap {
 public:
  SiteStopMap() = default;
  SiteStopMap(int dim, std::vector<Point> sites, std::vector<double> values, double fallback = 1.0);

  double operator()(const Point& x) const;

  std::span<const Point> sites() const { return sites_; }
  std::span<const double> values() const { return values_; }

 private:
  int dim_ = 1;
  std::vector<Point> sites_;  // sorted lexicographically
  std::vector<double> values_;
  double fallback_ = 1.0;
};

/// Normalizes `weights` (uniform when empty) and merges coincident atoms.
/// Throws std::invalid_argument on empty input, size mismatch, bad flags or
/// non-positive weights.
EmpiricalMeasure make_empirical(int dim, std::span<const Site> points,
                                std::span<const double> weights = {});

/// Convenience for d = 1.
EmpiricalMeasure make_empirical_1d(std::span<const double> xs, std::span<const int> flags,
                                   std::span<const double> weights = {});

double total_mass(MeasureView m);
double surviving_mass(MeasureView m);

/// Splits each surviving atom (x,1,w) into (x,1,w p(x)) and (x,0,w(1-p(x))).
/// The result is <= m in the stopping order and has the same x-marginal.
EmpiricalMeasure apply_stop(const EmpiricalMeasure& m, const StopMap& p);

/// Returns the survival density p with m_prime = apply_stop(m, p) when
/// m_prime <= m, or nullopt when the order fails (x-marginals differ beyond
/// `tol`, or survivor mass grows at some site).
std::optional<SiteStopMap> preceq_density(const EmpiricalMeasure& m_prime,
                                          const EmpiricalMeasure& m, double tol = 1e-10);

/// Same points with every flag set to 0, merged: the measure on R^d seen by g.
EmpiricalMeasure x_marginal(const EmpiricalMeasure& m);

/// (1 - eps) m + eps delta_y; y is appended after the atoms of m.
EmpiricalMeasure bump(const EmpiricalMeasure& m, const Atom& y, double eps);

/// Equality as measures: same support up to `tol` and weights within `tol`.
bool approx_equal(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double tol = 1e-12);

/// Weighted integral of h over the atoms; `flag` < 0 integrates over both flags.
double integrate(MeasureView m, const std::function<double(const Point&)>& h, int flag = -1);

/// CSV with header `x0,...,x{d-1},i,w`, one row per atom, LF endings. The
/// reader skips leading lines that start with `#`.
void write_measure_csv(std::ostream& out, const EmpiricalMeasure& m);
EmpiricalMeasure read_measure_csv(std::istream& in);

}  // namespace mfos
