#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfos/examples.hpp"
#include "mfos/measure.hpp"
#include "mfos/mollifier.hpp"
#include "mfos/obstacle_pde.hpp"
#include "mfos/problem.hpp"
#include "mfos/residual.hpp"
#include "mfos/value_solver.hpp"

namespace mfos {

/// Invalid configuration; `field` is the JSON path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct MollifyConfig {
  std::vector<int> ns{2, 4, 8, 16};
  int z_samples = 256;
  /// "linear", "nonlinear", "survivor_mass" or "survivor_first_moment".
  std::string functional = "linear";
};

struct ExampleConfig {
  double lambda = 1.0;     // meanvar
  double alpha = 0.9;      // es
  Distortion phi{};        // distortion
  Payoff psi = Payoff::put(1.0);
  AlphaGrid alpha_grid{};
  BetaSearch beta_search{};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ProblemSpec problem{};
  EmpiricalMeasure measure{};
  int steps = 20;
  SearchConfig search{};
  PdeConfig pde{};
  std::optional<int> dpp_split;
  /// Policy for `simulate`; never-stop when absent.
  std::optional<Policy> policy;
  double residual_t = 0.0;
  ResidualConfig residual{};
  MollifyConfig mollify{};
  ExampleConfig example{};
  std::string out_dir = "out";
  /// FNV-1a of the canonical (sorted, compact) JSON text.
  std::uint64_t hash = 0;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Parses and validates. Relative measure CSV paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

ProblemSpec parse_problem(const nlohmann::json& j, const std::string& path = "problem");
Payoff parse_payoff(const nlohmann::json& j, const std::string& path);

}  // namespace mfos
