#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "mfos/examples.hpp"
#include "mfos/policy.hpp"
#include "mfos/risk.hpp"

using namespace mfos;
using testgen::Gen;

namespace {

double variance_x(const EmpiricalMeasure& m) {
  double s1 = 0.0, s2 = 0.0;
  for (const Atom& a : m.atoms()) {
    s1 += a.w * a.x[0];
    s2 += a.w * a.x[0] * a.x[0];
  }
  return s2 - s1 * s1;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("json round trip") {
    Policy t = Policy::threshold({0.1, -0.2, 0.3}, false);
    Policy l;
    l.family = PolicyFamily::logistic;
    l.params = {{1.0, -0.5}, {2.0, 0.25}};
    Policy tab;
    tab.family = PolicyFamily::tabular;
    tab.edges = {-1.0, 0.0, 1.0};
    tab.params = {{0, 1, 0.5, 1}, {1, 1, 1, 0}};
    tab.initial_stop = SiteStopMap(1, {point1(0.5), point1(-0.5)}, {0.0, 1.0});
    for (const Policy& p : {t, l, tab}) {
      const Policy q = policy_from_json(to_json(p));
      CHECK(to_json(q) == to_json(p));
      for (int k = 0; k < p.nodes(); ++k) {
        for (double x : {-1.5, -0.5, 0.0, 0.5, 2.0}) CHECK(q.survival(k, point1(x)) == p.survival(k, point1(x)));
      }
    }
  }

  TEST_CASE("json with the wrong arity is rejected") {
    CHECK_THROWS(policy_from_json(nlohmann::json{{"family", "logistic"}, {"params", {{1.0}}}}));
    CHECK_THROWS(policy_from_json(nlohmann::json{{"family", "nope"}, {"params", {{1.0}}}}));
  }

  TEST_CASE("purity") {
    CHECK(Policy::threshold({0.0}).pure());
    CHECK(Policy::never_stop(3).pure());
    Policy c;
    c.family = PolicyFamily::constant_fraction;
    c.params = {{0.5}};
    CHECK_FALSE(c.pure());
  }

  // For a linear functional int k dm(., 1) the best stop map stops exactly
  // where k < 0 and keeps the rest.
  TEST_CASE("stop_sup on a linear functional follows the sign rule") {
    for (int c = 0; c < 100; ++c) {
      Gen g(41, c);
      const auto m = testgen::measure(g, 1, 8, 0.8);
      const auto k = [](double x) { return std::sin(3.0 * x); };
      const auto phi = [&k](const EmpiricalMeasure& mm) { return integrate(mm, [&k](const Point& x) { return k(x[0]); }, 1); };
      double want = 0.0;
      for (const Atom& a : m.atoms()) {
        if (a.i == 1) want += a.w * std::max(k(a.x[0]), 0.0);
      }
      const auto r = stop_sup(m, phi, SupMode::exact);
      CAPTURE(c);
      CHECK(r.value == doctest::Approx(want).epsilon(1e-12));
      for (const Atom& a : m.atoms()) {
        if (a.i == 1 && std::abs(k(a.x[0])) > 1e-9) CHECK(r.map(a.x) == (k(a.x[0]) > 0 ? 1.0 : 0.0));
      }
    }
  }

  // -Var of the x-marginal ignores flags, so stopping changes nothing.
  TEST_CASE("stop_sup of minus variance on three atoms") {
    const auto m = make_empirical_1d(std::vector<double>{-1.0, 0.5, 2.0}, std::vector<int>{1, 1, 1});
    const auto r = stop_sup(m, [](const EmpiricalMeasure& mm) { return -variance_x(mm); }, SupMode::exact);
    CHECK(r.value == doctest::Approx(-variance_x(m)).epsilon(1e-14));
    CHECK(r.evaluations >= 8);
  }

  // Fractional optimum: survivor mass s gives s (1 - s), maximized at s = 1/2.
  TEST_CASE("stop_sup refines to fractional maps") {
    const auto m = make_empirical_1d(std::vector<double>{0.0}, std::vector<int>{1});
    const auto r = stop_sup(m, [](const EmpiricalMeasure& mm) {
      const double s = surviving_mass(mm);
      return s * (1.0 - s);
    });
    CHECK(r.value == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(r.map(point1(0.0)) == doctest::Approx(0.5).epsilon(1e-3));
  }

  TEST_CASE("bootstrap error is zero without randomness and shrinks with paths") {
    const Problem p = make_problem(standard_put_spec());
    const auto m = make_empirical_1d(std::vector<double>{0.0, 1.0}, std::vector<int>{1, 1});
    const auto grid = TimeGrid::uniform(1.0, 10);
    const auto stopped = evaluate_policy(m, p, grid, Policy::stop_at(10, 0), 100, 1);
    CHECK(stopped.mc_stderr < 1e-14);
    CHECK(stopped.value == doctest::Approx(0.5).epsilon(1e-14));
    const auto small = evaluate_policy(m, p, grid, Policy::never_stop(10), 200, 1);
    const auto big = evaluate_policy(m, p, grid, Policy::never_stop(10), 3200, 1);
    CHECK(big.mc_stderr < 0.5 * small.mc_stderr);
    CHECK(big.mc_stderr > 0.1 * small.mc_stderr);
  }
}
