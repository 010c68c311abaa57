#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfos/measure.hpp"

namespace mfos {

/// Largest supplies x demands product accepted by the exact solver.
inline constexpr std::size_t kMaxTransportEdges = 512 * 512;

/// Optimal transport cost between discrete marginals `a` (rows) and `b`
/// (columns) for the row-major cost matrix `cost` (a.size() x b.size()).
/// Both marginals must carry the same total mass. Exact: successive shortest
/// augmenting paths with Dijkstra on reduced costs.
double min_cost_transport(std::span<const double> a, std::span<const double> b,
                          std::span<const double> cost);

/// Ground distance on R^d x {0,1}: sqrt(|x - x'|^2 + (i - i')^2).
double ground_distance(const Atom& a, const Atom& b, int dim);

/// Exact W_order between two measures (order 1 or 2). Uses the quantile
/// coupling when d = 1 and every atom of both measures has the same flag;
/// otherwise solves the transport LP. Throws NumericalError when the LP
/// exceeds kMaxTransportEdges.
double wasserstein(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2, int order);

/// W_order between two measures on the real line given as (x, w) atoms.
double wasserstein_1d(std::span<const double> x1, std::span<const double> w1,
                      std::span<const double> x2, std::span<const double> w2, int order);

}  // namespace mfos
