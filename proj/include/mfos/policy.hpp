#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfos/dynamics.hpp"
#include "mfos/measure.hpp"
#include "mfos/problem.hpp"

namespace mfos {

enum class PolicyFamily { threshold, logistic, constant_fraction, tabular };

std::string to_string(PolicyFamily f);
PolicyFamily policy_family_from_string(const std::string& s);

/// Relaxed stopping rule: survival probability p_k(x) at grid nodes
/// k = 0..n-1 (every particle stops at node n). Reads the first coordinate.
///
///   threshold          params[k] = {theta}: stop iff x <= theta (or x >= theta
///                      when stop_below is false)
///   logistic           params[k] = {a, c}: p = 1 / (1 + exp(-(a x + c)))
///   constant_fraction  params[k] = {q}: p = q
///   tabular            params[k] = one value per bin of `edges`
///                      (edges.size() + 1 bins, bin j = [edges[j-1], edges[j]))
struct Policy {
  PolicyFamily family = PolicyFamily::constant_fraction;
  bool stop_below = true;
  std::vector<std::vector<double>> params;
  std::vector<double> edges;
  /// Extra survival factor applied at node 0 (composite candidates).
  std::optional<SiteStopMap> initial_stop;

  int nodes() const { return static_cast<int>(params.size()); }
  double survival(int k, const Point& x) const;
  StopRule rule() const;
  /// True when every p_k takes values in {0,1} only.
  bool pure() const;

  static Policy never_stop(int n);
  static Policy stop_at(int n, int node);
  static Policy threshold(std::vector<double> theta, bool stop_below = true);
};

nlohmann::json to_json(const Policy& p);
Policy policy_from_json(const nlohmann::json& j);

struct ValueEstimate {
  double value = 0.0;
  double mc_stderr = 0.0;
  std::size_t n_paths = 0;
};

inline constexpr int kBootstrapResamples = 200;

/// Bootstrap standard error of objective(): particles are resampled within
/// their source atom when every atom spawned >= 2 paths, otherwise pooled and
/// renormalized to the resampled mass. Particles stopped at spawn are never
/// resampled. Running rates are held at their sampled values.
double bootstrap_stderr(const PathBundle& b, std::span<const double> alive, const Problem& problem,
                        std::uint64_t seed, int resamples = kBootstrapResamples);

/// Simulates m0 under `pol` (stop, then diffuse) and returns the objective
/// with its bootstrap standard error.
ValueEstimate evaluate_policy(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              const Policy& pol, int paths_per_atom, std::uint64_t seed);

enum class SupMode { exact, search };

struct StopSupResult {
  double value = 0.0;
  SiteStopMap map;
  std::size_t evaluations = 0;
};

/// sup over p in [0,1]^survivors of phi(apply_stop(m, p)). Exact mode visits
/// every vertex of {0,1}^S (S <= 16, else std::domain_error) and then refines
/// fractionally by coordinate search; search mode starts from p = 1 and p = 0.
/// Ties prefer larger survivor mass.
StopSupResult stop_sup(const EmpiricalMeasure& m, const std::function<double(const EmpiricalMeasure&)>& phi,
                       SupMode mode = SupMode::exact);

inline constexpr std::size_t kMaxExactSurvivors = 16;

/// stop_sup with phi = g read on the x-marginal.
StopSupResult terminal_stop_sup(const EmpiricalMeasure& m, const std::function<double(MeasureView)>& g,
                                SupMode mode = SupMode::exact);

}  // namespace mfos
