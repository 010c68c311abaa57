#include "mfos/config.hpp"

#include <fstream>
#include <sstream>

namespace mfos {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

double opt_num(const json& j, const std::string& key, const std::string& path, double fallback) {
  const json* v = find(j, key);
  return v ? num(*v, join(path, key)) : fallback;
}

int opt_int(const json& j, const std::string& key, const std::string& path, int fallback, int min_value) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  const auto x = v->get<long long>();
  if (x < min_value || x > 1'000'000'000) {
    throw ConfigError(join(path, key), "must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<int>(x);
}

bool opt_bool(const json& j, const std::string& key, const std::string& path, bool fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return v->get<bool>();
}

std::string opt_str(const json& j, const std::string& key, const std::string& path, const std::string& fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(join(path, key), "expected a string");
  return v->get<std::string>();
}

std::string req_str(const json& j, const std::string& key, const std::string& path) {
  if (!find(j, key)) throw ConfigError(join(path, key), "missing");
  return opt_str(j, key, path, "");
}

// A scalar is broadcast to every coordinate.
Point vec(const json& j, const std::string& path, int d) {
  Point p{};
  if (j.is_number()) {
    for (int c = 0; c < d; ++c) p[c] = j.get<double>();
    return p;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != d) {
    throw ConfigError(path, "expected a number or an array of " + std::to_string(d) + " numbers");
  }
  for (int c = 0; c < d; ++c) p[c] = num(j[c], path + "[" + std::to_string(c) + "]");
  return p;
}

// A scalar s means s I; otherwise a d x d nested array.
Matrix mat(const json& j, const std::string& path, int d) {
  Matrix m{};
  if (j.is_number()) {
    for (int c = 0; c < d; ++c) m[c * kMaxDim + c] = j.get<double>();
    return m;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != d) throw ConfigError(path, "expected a number or a d x d array");
  for (int r = 0; r < d; ++r) {
    const Point row = vec(j[r], path + "[" + std::to_string(r) + "]", d);
    if (!j[r].is_array()) throw ConfigError(path + "[" + std::to_string(r) + "]", "expected an array");
    for (int c = 0; c < d; ++c) m[r * kMaxDim + c] = row[c];
  }
  return m;
}

Distortion parse_distortion(const json& j, const std::string& path) {
  expect_object(j, path);
  Distortion phi;
  const std::string kind = opt_str(j, "kind", path, "power");
  if (kind == "identity") {
    phi.kind = Distortion::Kind::identity;
  } else if (kind == "power") {
    phi.kind = Distortion::Kind::power;
    phi.param = opt_num(j, "param", path, 0.7);
    if (!(phi.param > 0.0 && phi.param <= 1.0)) throw ConfigError(join(path, "param"), "power must lie in (0, 1]");
  } else if (kind == "exponential") {
    phi.kind = Distortion::Kind::exponential;
    phi.param = opt_num(j, "param", path, 1.0);
    if (!(phi.param > 0.0)) throw ConfigError(join(path, "param"), "rate must be positive");
  } else {
    throw ConfigError(join(path, "kind"), "unknown distortion '" + kind + "'");
  }
  return phi;
}

DriftSpec parse_drift(const json& j, const std::string& path, int d) {
  expect_object(j, path);
  DriftSpec s;
  const std::string kind = req_str(j, "kind", path);
  if (kind == "constant") {
    s.kind = DriftSpec::Kind::constant;
    if (const json* c = find(j, "c")) s.c = vec(*c, join(path, "c"), d);
  } else if (kind == "affine") {
    s.kind = DriftSpec::Kind::affine;
    if (const json* c = find(j, "c")) s.c = vec(*c, join(path, "c"), d);
    if (const json* a = find(j, "a")) s.a = mat(*a, join(path, "a"), d);
  } else if (kind == "gbm") {
    s = gbm_drift(opt_num(j, "b0", path, 0.0));
  } else if (kind == "mean_reverting") {
    s.kind = DriftSpec::Kind::mean_reverting;
    s.kappa = opt_num(j, "kappa", path, 1.0);
    if (const json* th = find(j, "theta")) s.theta = vec(*th, join(path, "theta"), d);
  } else if (kind == "mean_field_attraction") {
    s.kind = DriftSpec::Kind::mean_field_attraction;
    s.kappa = opt_num(j, "kappa", path, 1.0);
  } else {
    throw ConfigError(join(path, "kind"), "unknown drift '" + kind + "'");
  }
  return s;
}

VolSpec parse_vol(const json& j, const std::string& path, int d) {
  expect_object(j, path);
  VolSpec s;
  const std::string kind = req_str(j, "kind", path);
  if (kind == "constant") {
    s.kind = VolSpec::Kind::constant;
    const json* v = find(j, "s");
    if (!v) throw ConfigError(join(path, "s"), "missing");
    s.s = mat(*v, join(path, "s"), d);
  } else if (kind == "proportional" || kind == "gbm") {
    s = gbm_vol(opt_num(j, "s0", path, 0.0));
  } else {
    throw ConfigError(join(path, "kind"), "unknown volatility '" + kind + "'");
  }
  return s;
}

RunningSpec parse_running(const json& j, const std::string& path, int d) {
  expect_object(j, path);
  RunningSpec s;
  const std::string kind = opt_str(j, "kind", path, "zero");
  if (kind == "zero") {
    s.kind = RunningSpec::Kind::zero;
  } else if (kind == "constant") {
    s.kind = RunningSpec::Kind::constant;
    s.a = opt_num(j, "a", path, 0.0);
  } else if (kind == "linear") {
    s.kind = RunningSpec::Kind::linear;
    s.a = opt_num(j, "a", path, 0.0);
    if (const json* c = find(j, "c")) s.c = vec(*c, join(path, "c"), d);
  } else {
    throw ConfigError(join(path, "kind"), "unknown running reward '" + kind + "'");
  }
  return s;
}

TerminalSpec parse_terminal(const json& j, const std::string& path) {
  expect_object(j, path);
  TerminalSpec s;
  const std::string kind = req_str(j, "kind", path);
  if (const json* psi = find(j, "psi")) s.psi = parse_payoff(*psi, join(path, "psi"));
  if (kind == "expectation") {
    s.kind = TerminalSpec::Kind::expectation;
  } else if (kind == "mean_variance") {
    s.kind = TerminalSpec::Kind::mean_variance;
    s.lambda = opt_num(j, "lambda", path, 1.0);
    if (s.lambda < 0.0) throw ConfigError(join(path, "lambda"), "must be >= 0");
  } else if (kind == "neg_variance") {
    s.kind = TerminalSpec::Kind::neg_variance;
  } else if (kind == "distortion") {
    s.kind = TerminalSpec::Kind::distortion;
    if (const json* phi = find(j, "phi")) s.phi = parse_distortion(*phi, join(path, "phi"));
  } else if (kind == "neg_expected_shortfall") {
    s.kind = TerminalSpec::Kind::neg_expected_shortfall;
    s.alpha = opt_num(j, "alpha", path, 0.9);
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ConfigError(join(path, "alpha"), "must lie in (0, 1)");
  } else if (kind == "squared_mean") {
    s.kind = TerminalSpec::Kind::squared_mean;
  } else {
    throw ConfigError(join(path, "kind"), "unknown terminal reward '" + kind + "'");
  }
  return s;
}

EmpiricalMeasure parse_measure(const json& j, const std::string& path, int d, const std::filesystem::path& base) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base / p;
    std::ifstream in(p);
    if (!in) throw ConfigError(path, "cannot open measure file " + p.string());
    try {
      EmpiricalMeasure m = read_measure_csv(in);
      if (m.dim() != d) throw ConfigError(path, "measure dimension differs from problem.d");
      return m;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a CSV path or a non-empty array of atoms");
  std::vector<Site> sites;
  std::vector<double> w;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string ap = path + "[" + std::to_string(k) + "]";
    expect_object(j[k], ap);
    const json* x = find(j[k], "x");
    if (!x) throw ConfigError(join(ap, "x"), "missing");
    const int flag = opt_int(j[k], "i", ap, 1, 0);
    if (flag > 1) throw ConfigError(join(ap, "i"), "flag must be 0 or 1");
    const double wk = opt_num(j[k], "w", ap, 1.0);
    if (!(wk > 0.0)) throw ConfigError(join(ap, "w"), "weight must be positive");
    sites.push_back(Site{vec(*x, join(ap, "x"), d), flag});
    w.push_back(wk);
  }
  return make_empirical(d, sites, w);
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Payoff parse_payoff(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = req_str(j, "kind", path);
  if (kind == "put") return Payoff::put(opt_num(j, "strike", path, 1.0));
  if (kind == "call") return Payoff::call(opt_num(j, "strike", path, 1.0));
  if (kind == "polynomial") {
    return Payoff::quadratic(opt_num(j, "a", path, 0.0), opt_num(j, "c", path, 1.0), opt_num(j, "q", path, 0.0));
  }
  Payoff p;
  if (kind == "abs") {
    p.kind = Payoff::Kind::abs;
  } else if (kind == "sqrt1px2") {
    p.kind = Payoff::Kind::sqrt1px2;
  } else {
    throw ConfigError(join(path, "kind"), "unknown payoff '" + kind + "'");
  }
  return p;
}

ProblemSpec parse_problem(const json& j, const std::string& path) {
  expect_object(j, path);
  if (const json* b = find(j, "builtin")) {
    if (!b->is_string()) throw ConfigError(join(path, "builtin"), "expected a string");
    const std::string name = b->get<std::string>();
    if (name != "standard_put") throw ConfigError(join(path, "builtin"), "unknown built-in problem '" + name + "'");
    const double sigma = opt_num(j, "sigma", path, 1.0);
    const double horizon = opt_num(j, "horizon", path, 1.0);
    if (!(sigma >= 0.0)) throw ConfigError(join(path, "sigma"), "must be >= 0");
    if (!(horizon > 0.0)) throw ConfigError(join(path, "horizon"), "must be positive");
    return standard_put_spec(opt_num(j, "strike", path, 1.0), sigma, horizon);
  }
  ProblemSpec s;
  s.d = opt_int(j, "d", path, 1, 1);
  if (s.d > kMaxDim) throw ConfigError(join(path, "d"), "at most " + std::to_string(kMaxDim));
  s.horizon = opt_num(j, "horizon", path, 1.0);
  if (!(s.horizon > 0.0)) throw ConfigError(join(path, "horizon"), "must be positive");
  for (const char* key : {"drift", "vol", "terminal"}) {
    if (!find(j, key)) throw ConfigError(join(path, key), "missing");
  }
  s.drift = parse_drift(j["drift"], join(path, "drift"), s.d);
  s.vol = parse_vol(j["vol"], join(path, "vol"), s.d);
  if (const json* r = find(j, "running")) s.running = parse_running(*r, join(path, "running"), s.d);
  s.terminal = parse_terminal(j["terminal"], join(path, "terminal"));
  s.label = opt_str(j, "label", path, "custom");
  return s;
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  expect_object(j, "config");
  ExperimentConfig c;
  const json* seed = find(j, "seed");
  if (!seed) throw ConfigError("seed", "missing (every run needs an explicit seed)");
  if (!seed->is_number_integer() || seed->get<long long>() < 0) throw ConfigError("seed", "expected a non-negative integer");
  c.seed = seed->get<std::uint64_t>();

  if (!find(j, "problem")) throw ConfigError("problem", "missing");
  c.problem = parse_problem(j["problem"], "problem");
  if (!find(j, "measure")) throw ConfigError("measure", "missing");
  c.measure = parse_measure(j["measure"], "measure", c.problem.d, base_dir);

  c.steps = opt_int(j, "steps", "", 20, 1);
  if (const json* s = find(j, "search")) {
    expect_object(*s, "search");
    const std::string fam = opt_str(*s, "family", "search", "threshold");
    try {
      c.search.family = policy_family_from_string(fam);
    } catch (const std::invalid_argument&) {
      throw ConfigError("search.family", "unknown policy family '" + fam + "'");
    }
    c.search.stop_below = opt_bool(*s, "stop_below", "search", true);
    c.search.paths_per_atom = opt_int(*s, "paths_per_atom", "search", 1000, 1);
    c.search.coarse_points = opt_int(*s, "coarse_points", "search", 17, 2);
    c.search.tol = opt_num(*s, "tol", "search", 1e-3);
    if (!(c.search.tol > 0.0)) throw ConfigError("search.tol", "must be positive");
    c.search.max_evals = opt_int(*s, "max_evals", "search", 5000, 0);
    c.search.tabular_bins = opt_int(*s, "tabular_bins", "search", 8, 1);
    c.search.exact = opt_bool(*s, "exact", "search", false);
  }
  if (const json* p = find(j, "pde")) {
    expect_object(*p, "pde");
    c.pde.x_min = opt_num(*p, "x_min", "pde", c.pde.x_min);
    c.pde.x_max = opt_num(*p, "x_max", "pde", c.pde.x_max);
    if (!(c.pde.x_max > c.pde.x_min)) throw ConfigError("pde.x_max", "must exceed x_min");
    c.pde.nx = opt_int(*p, "nx", "pde", c.pde.nx, 3);
    c.pde.nt = opt_int(*p, "nt", "pde", c.pde.nt, 1);
    c.pde.theta = opt_num(*p, "theta", "pde", c.pde.theta);
    if (!(c.pde.theta >= 0.0 && c.pde.theta <= 1.0)) throw ConfigError("pde.theta", "must lie in [0, 1]");
  }
  if (const json* s = find(j, "dpp_split")) {
    if (!s->is_number_integer()) throw ConfigError("dpp_split", "expected an integer");
    const int split = s->get<int>();
    if (split < 1 || split > c.steps) throw ConfigError("dpp_split", "must lie in [1, steps]");
    c.dpp_split = split;
  }
  if (const json* pol = find(j, "policy")) {
    try {
      c.policy = policy_from_json(*pol);
    } catch (const std::exception& e) {
      throw ConfigError("policy", e.what());
    }
    if (c.policy->nodes() != c.steps) throw ConfigError("policy.params", "needs one entry per step");
  }
  if (const json* r = find(j, "residual")) {
    expect_object(*r, "residual");
    c.residual_t = opt_num(*r, "t", "residual", 0.0);
    if (!(c.residual_t >= 0.0 && c.residual_t <= c.problem.horizon)) {
      throw ConfigError("residual.t", "must lie in [0, horizon]");
    }
    c.residual.bumps.eps = opt_num(*r, "eps", "residual", c.residual.bumps.eps);
    if (!(c.residual.bumps.eps > 0.0 && c.residual.bumps.eps <= 0.5)) {
      throw ConfigError("residual.eps", "must lie in (0, 0.5]");
    }
    c.residual.stop_maps = opt_int(*r, "stop_maps", "residual", c.residual.stop_maps, 0);
    c.residual.jitters = opt_int(*r, "jitters", "residual", c.residual.jitters, 0);
    c.residual.keep_tol = opt_num(*r, "keep_tol", "residual", c.residual.keep_tol);
  }
  if (const json* m = find(j, "mollify")) {
    expect_object(*m, "mollify");
    if (const json* ns = find(*m, "n")) {
      if (!ns->is_array() || ns->empty()) throw ConfigError("mollify.n", "expected a non-empty array of integers");
      c.mollify.ns.clear();
      for (const json& v : *ns) {
        if (!v.is_number_integer() || v.get<int>() < 1) throw ConfigError("mollify.n", "entries must be integers >= 1");
        c.mollify.ns.push_back(v.get<int>());
      }
    }
    c.mollify.z_samples = opt_int(*m, "z_samples", "mollify", c.mollify.z_samples, 1);
    c.mollify.functional = opt_str(*m, "functional", "mollify", c.mollify.functional);
    const auto& f = c.mollify.functional;
    if (f != "linear" && f != "nonlinear" && f != "survivor_mass" && f != "survivor_first_moment") {
      throw ConfigError("mollify.functional", "unknown functional '" + f + "'");
    }
  }
  if (const json* e = find(j, "example")) {
    expect_object(*e, "example");
    c.example.lambda = opt_num(*e, "lambda", "example", c.example.lambda);
    if (c.example.lambda < 0.0) throw ConfigError("example.lambda", "must be >= 0");
    c.example.alpha = opt_num(*e, "alpha", "example", c.example.alpha);
    if (!(c.example.alpha > 0.0 && c.example.alpha < 1.0)) throw ConfigError("example.alpha", "must lie in (0, 1)");
    if (const json* phi = find(*e, "phi")) c.example.phi = parse_distortion(*phi, "example.phi");
    if (const json* psi = find(*e, "psi")) c.example.psi = parse_payoff(*psi, "example.psi");
  }
  c.out_dir = opt_str(j, "out", "", c.out_dir);
  c.hash = fnv1a(j.dump());
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace mfos
