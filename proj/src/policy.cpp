#include "mfos/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mfos/rng.hpp"

namespace mfos {
namespace {

constexpr std::uint64_t kBootstrapTag = 0xB007;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

std::string to_string(PolicyFamily f) {
  switch (f) {
    case PolicyFamily::threshold: return "threshold";
    case PolicyFamily::logistic: return "logistic";
    case PolicyFamily::constant_fraction: return "constant_fraction";
    case PolicyFamily::tabular: return "tabular";
  }
  return "?";
}

PolicyFamily policy_family_from_string(const std::string& s) {
  if (s == "threshold") return PolicyFamily::threshold;
  if (s == "logistic") return PolicyFamily::logistic;
  if (s == "constant_fraction") return PolicyFamily::constant_fraction;
  if (s == "tabular") return PolicyFamily::tabular;
  throw std::invalid_argument("unknown policy family '" + s + "'");
}

double Policy::survival(int k, const Point& x) const {
  if (k < 0 || k >= nodes()) throw std::out_of_range("policy node out of range");
  const auto& pk = params[k];
  double p = 1.0;
  switch (family) {
    case PolicyFamily::threshold: {
      const bool stop = stop_below ? x[0] <= pk.at(0) : x[0] >= pk.at(0);
      p = stop ? 0.0 : 1.0;
      break;
    }
    case PolicyFamily::logistic:
      p = sigmoid(pk.at(0) * x[0] + pk.at(1));
      break;
    case PolicyFamily::constant_fraction:
      p = pk.at(0);
      break;
    case PolicyFamily::tabular: {
      const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x[0]) - edges.begin());
      p = pk.at(bin);
      break;
    }
  }
  if (k == 0 && initial_stop) p *= (*initial_stop)(x);
  return p;
}

StopRule Policy::rule() const {
  return [this](int k, const Point& x) { return survival(k, x); };
}

bool Policy::pure() const {
  if (initial_stop) {
    for (double v : initial_stop->values()) {
      if (!is_binary(v)) return false;
    }
  }
  switch (family) {
    case PolicyFamily::threshold: return true;
    case PolicyFamily::logistic: return false;
    case PolicyFamily::constant_fraction:
    case PolicyFamily::tabular:
      for (const auto& pk : params) {
        for (double v : pk) {
          if (!is_binary(v)) return false;
        }
      }
      return true;
  }
  return false;
}

Policy Policy::never_stop(int n) {
  Policy p;
  p.family = PolicyFamily::constant_fraction;
  p.params.assign(n, {1.0});
  return p;
}

Policy Policy::stop_at(int n, int node) {
  Policy p = never_stop(n);
  if (node < n) p.params[node] = {0.0};
  return p;
}

Policy Policy::threshold(std::vector<double> theta, bool stop_below) {
  Policy p;
  p.family = PolicyFamily::threshold;
  p.stop_below = stop_below;
  for (double t : theta) p.params.push_back({t});
  return p;
}

nlohmann::json to_json(const Policy& p) {
  nlohmann::json j;
  j["family"] = to_string(p.family);
  j["params"] = p.params;
  if (p.family == PolicyFamily::threshold) j["stop_below"] = p.stop_below;
  if (p.family == PolicyFamily::tabular) j["edges"] = p.edges;
  if (p.initial_stop) {
    nlohmann::json sites = nlohmann::json::array();
    for (const Point& s : p.initial_stop->sites()) sites.push_back(std::vector<double>(s.begin(), s.end()));
    j["initial_stop"] = {{"sites", sites},
                         {"values", std::vector<double>(p.initial_stop->values().begin(), p.initial_stop->values().end())}};
  }
  return j;
}

Policy policy_from_json(const nlohmann::json& j) {
  Policy p;
  p.family = policy_family_from_string(j.at("family").get<std::string>());
  p.params = j.at("params").get<std::vector<std::vector<double>>>();
  if (j.contains("stop_below")) p.stop_below = j.at("stop_below").get<bool>();
  if (j.contains("edges")) p.edges = j.at("edges").get<std::vector<double>>();
  const std::size_t want = p.family == PolicyFamily::logistic ? 2 : p.family == PolicyFamily::tabular ? p.edges.size() + 1 : 1;
  for (const auto& pk : p.params) {
    if (pk.size() != want) throw std::invalid_argument("policy params have the wrong arity for family " + to_string(p.family));
  }
  if (j.contains("initial_stop")) {
    std::vector<Point> sites;
    for (const auto& s : j.at("initial_stop").at("sites")) {
      Point x{};
      const auto v = s.get<std::vector<double>>();
      for (std::size_t c = 0; c < v.size() && c < x.size(); ++c) x[c] = v[c];
      sites.push_back(x);
    }
    p.initial_stop = SiteStopMap(kMaxDim, std::move(sites), j.at("initial_stop").at("values").get<std::vector<double>>());
  }
  return p;
}

double bootstrap_stderr(const PathBundle& b, std::span<const double> alive, const Problem& problem,
                        std::uint64_t seed, int resamples) {
  if (resamples < 2) return 0.0;
  const std::size_t N = b.N;
  // Particles stopped at spawn never move; they keep multiplier 1.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> random;
  double random_mass = 0.0;
  for (std::size_t p = 0; p < N; ++p) {
    if (b.alive0[p] <= 0.0) continue;
    if (b.source[p] >= groups.size()) groups.resize(b.source[p] + 1);
    groups[b.source[p]].push_back(p);
    random.push_back(p);
    random_mass += b.w0[p];
  }
  if (random.empty()) return 0.0;
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  const bool stratified = std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() >= 2; });
  const CounterRng rng(derive_seed(seed, kBootstrapTag));
  std::vector<double> values(static_cast<std::size_t>(resamples));
  std::vector<double> mult(N);
  for (int r = 0; r < resamples; ++r) {
    std::fill(mult.begin(), mult.end(), 1.0);
    for (std::size_t p : random) mult[p] = 0.0;
    std::uint64_t draw = 0;
    if (stratified) {
      for (const auto& g : groups) {
        for (std::size_t q = 0; q < g.size(); ++q) {
          mult[g[rng.below(g.size(), draw++, static_cast<std::uint32_t>(r), 0)]] += 1.0;
        }
      }
    } else {
      const std::size_t R = random.size();
      for (std::size_t q = 0; q < R; ++q) mult[random[rng.below(R, draw++, static_cast<std::uint32_t>(r), 0)]] += 1.0;
      double mass = 0.0;
      for (std::size_t p : random) mass += mult[p] * b.w0[p];
      for (std::size_t p : random) mult[p] *= random_mass / mass;
    }
    values[r] = objective(b, alive, problem, mult);
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / resamples;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (resamples - 1));
}

ValueEstimate evaluate_policy(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              const Policy& pol, int paths_per_atom, std::uint64_t seed) {
  if (pol.nodes() != grid.n) throw std::invalid_argument("policy node count differs from grid steps");
  const PathBundle b = simulate(m0, problem, grid, paths_per_atom, seed, pol.rule());
  ValueEstimate est;
  est.value = objective(b, b.alive, problem);
  est.mc_stderr = bootstrap_stderr(b, b.alive, problem, seed);
  est.n_paths = b.N;
  return est;
}

StopSupResult stop_sup(const EmpiricalMeasure& m, const std::function<double(const EmpiricalMeasure&)>& phi,
                       SupMode mode) {
  std::vector<Point> sites;
  std::vector<double> mass;
  for (const Atom& a : m.atoms()) {
    if (a.i == 1) {
      sites.push_back(a.x);
      mass.push_back(a.w);
    }
  }
  const std::size_t S = sites.size();
  StopSupResult res;
  res.map = SiteStopMap(m.dim(), sites, std::vector<double>(S, 1.0));
  res.value = phi(m);
  res.evaluations = 1;
  if (S == 0) return res;
  if (mode == SupMode::exact && S > kMaxExactSurvivors) {
    throw std::domain_error("stop_sup exact mode supports at most 16 survivors");
  }

  constexpr double kTie = 1e-13;
  std::vector<double> best(S, 1.0);
  double best_val = res.value;
  double best_surv = std::accumulate(mass.begin(), mass.end(), 0.0);
  auto consider = [&](const std::vector<double>& p) {
    const SiteStopMap map(m.dim(), sites, p);
    const double v = phi(apply_stop(m, map));
    ++res.evaluations;
    double surv = 0.0;
    for (std::size_t k = 0; k < S; ++k) surv += mass[k] * p[k];
    if (v > best_val + kTie || (v > best_val - kTie && surv > best_surv)) {
      best_val = v;
      best_surv = surv;
      best = p;
      return true;
    }
    return false;
  };

  if (mode == SupMode::exact) {
    std::vector<double> p(S);
    for (std::uint32_t bits = 0; bits < (1u << S); ++bits) {
      for (std::size_t k = 0; k < S; ++k) p[k] = (bits >> k) & 1u ? 1.0 : 0.0;
      consider(p);
    }
  } else {
    consider(std::vector<double>(S, 0.0));
    for (double level : {0.25, 0.5, 0.75}) {
      for (std::size_t k = 0; k < S; ++k) {
        auto p = best;
        p[k] = level;
        consider(p);
        p[k] = 0.0;
        consider(p);
      }
    }
  }
  // Fractional refinement: coordinate moves with halving steps.
  for (double step = 0.5; step >= 1.0 / 1024.0; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t k = 0; k < S; ++k) {
        for (double dir : {-1.0, 1.0}) {
          auto p = best;
          p[k] = std::clamp(p[k] + dir * step, 0.0, 1.0);
          if (p[k] == best[k]) continue;
          const double before = best_val;
          if (consider(p) && best_val > before + kTie) improved = true;
        }
      }
    }
  }
  res.value = best_val;
  res.map = SiteStopMap(m.dim(), sites, best);
  return res;
}

StopSupResult terminal_stop_sup(const EmpiricalMeasure& m, const std::function<double(MeasureView)>& g,
                                SupMode mode) {
  return stop_sup(m, [&g](const EmpiricalMeasure& mp) { return g(mp.atoms()); }, mode);
}

}  // namespace mfos
