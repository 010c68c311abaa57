#pragma once

#include <cstdint>
#include <vector>

#include "mfos/policy.hpp"

namespace mfos {

struct SearchConfig {
  PolicyFamily family = PolicyFamily::threshold;
  bool stop_below = true;
  int paths_per_atom = 1000;
  int coarse_points = 17;
  /// Coordinate descent stops once the step falls below tol * parameter scale.
  double tol = 1e-3;
  int max_evals = 5000;
  int tabular_bins = 8;
  /// Enumerate per-particle stop nodes instead of searching a family.
  /// Needs deterministic dynamics (sigma = 0) and few particles.
  bool exact = false;
  /// Evaluated alongside the coarse sweep (must match the grid).
  std::vector<Policy> extra_candidates;
};

struct SolveResult {
  ValueEstimate estimate;
  Policy policy;
  std::size_t evaluations = 0;
  /// True when max_evals ran out before the step met tol.
  bool budget_exhausted = false;
};

/// Largest number of per-particle assignments visited by exact mode.
inline constexpr std::size_t kMaxExactAssignments = 1u << 20;

/// Best objective over the configured family: a coarse sweep of a parameter
/// shared by all nodes, then coordinate ascent with halving steps. All
/// candidates share the same random numbers. Near-ties go to the candidate
/// keeping more survivor mass over time.
SolveResult solve_value(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                        const SearchConfig& cfg, std::uint64_t seed);

struct DppReport {
  double lhs = 0.0;
  double lhs_stderr = 0.0;
  double rhs = 0.0;
  double rhs_stderr = 0.0;
  double residual = 0.0;         // |lhs - rhs|
  double combined_stderr = 0.0;  // sqrt(lhs_se^2 + rhs_se^2)
  std::size_t first_segment_candidates = 0;
};

/// Compares the full solve with the best split at node s: running reward on
/// [t_0, t_s) under a first-segment policy plus the value restarted at t_s
/// from the resulting (pre-stop) law. 0 < s <= n.
DppReport verify_dpp(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid, int s,
                     const SearchConfig& cfg, std::uint64_t seed);

struct MonotonicityTrial {
  double v_m = 0.0, se_m = 0.0;
  double v_stopped = 0.0, se_stopped = 0.0;
  bool violation = false;
};

struct MonotonicityReport {
  std::vector<MonotonicityTrial> trials;
  int violations = 0;
};

/// For random stop maps p checks V(m) >= V(apply_stop(m, p)) - 3 combined
/// stderr. The search on m also sees "apply p at t_0, then follow the best
/// policy found for the stopped law". Trials 0 and 1 use p = 1 and p = 0.
MonotonicityReport monotonicity_check(const EmpiricalMeasure& m, const Problem& problem, const TimeGrid& grid,
                                      int trials, const SearchConfig& cfg, std::uint64_t seed);

}  // namespace mfos
