#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfos/measure.hpp"

namespace mfos {

struct MollifierParams {
  int n = 4;
  int z_samples = 256;
  /// Steepness constant c of the smoothstep e^{-c/u} / (e^{-c/u} + e^{-c/(1-u)}).
  double step_c = 0.6;

  /// |j| <= 2 n^2.
  int j_max() const { return 2 * n * n; }
  /// N_n = 4 n^2 + 1 grid points.
  int grid_size() const { return 4 * n * n + 1; }
};

/// C-infinity step: 0 for u <= 0, 1 for u >= 1, S(u) + S(1 - u) = 1.
double smoothstep(double u, double c = 0.6);

/// Cutoff: 1 on |x| <= n, 0 outside |x| < 3n/2.
double cutoff_h(double x, const MollifierParams& p);

/// Partition function supported on ((j-1)/n, (j+1)/n), equal to 1 at j/n.
double partition_phi(int j, double x, const MollifierParams& p);

/// psi_j(mu) for j = -j_max..j_max (index j + j_max), for the atoms of `mu`
/// with flag `flag` (flag < 0: all atoms). Sums to mu(R).
std::vector<double> partition_weights(MeasureView mu, const MollifierParams& p, int flag = -1);

/// z_j for j = -j_max..j_max (index j + j_max). Free coordinates are drawn
/// from the bump density exp(-1/(1-u^2)) on u = z N^3 in (-1, 1); z_0
/// balances the sum. Draw `sample` of stream `seed`.
std::vector<double> sample_simplex(const MollifierParams& p, std::uint64_t seed, std::uint64_t sample);

/// m_n(., z): per flag, mass hat-psi_j(m(., i), z) at x = j/n. d must be 1.
EmpiricalMeasure project_measure(const EmpiricalMeasure& m, std::span<const double> z, const MollifierParams& p);

using MeasureFunctional = std::function<double(const EmpiricalMeasure&)>;

struct MollifiedValue {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo U_n(m) over params.z_samples draws. The same seed gives the
/// same draws for any m (common random numbers).
MollifiedValue mollify(const MeasureFunctional& u, const EmpiricalMeasure& m, const MollifierParams& p,
                       std::uint64_t seed);

struct ProbeReport {
  int trials = 0;
  int violations = 0;
  double max_excess = 0.0;  // max of U_n(m') - U_n(m) over pairs
};

/// For U increasing in the stopping order: draws pairs m' = apply_stop(m, p)
/// with m cycling through `bases` and p random per survivor site (p = 1 when
/// `identity_maps`), and counts U_n(m') > U_n(m) + 1e-12 under common draws.
ProbeReport monotonicity_probe(const MeasureFunctional& u, std::span<const EmpiricalMeasure> bases,
                               const MollifierParams& p, int trials, std::uint64_t seed, bool identity_maps = false);

/// Named test functionals on d = 1 measures (k = sin):
///   linear                 int (k + 1/2 + sin/4) dm(., 1) + int k dm(., 0)
///   nonlinear              (int (2 + sin) dm(., 1))^2 + int atan dm
///   survivor_mass          m(R, 1)
///   survivor_first_moment  int x m(dx, 1)
/// Throws std::invalid_argument for other names.
MeasureFunctional builtin_functional(const std::string& name);

/// Ten fixed measures with atoms in [-1.5, 1.5] and mixed flags.
std::vector<EmpiricalMeasure> compact_test_family(std::uint64_t seed, int atoms = 5);

}  // namespace mfos
