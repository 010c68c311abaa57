#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "mfos/examples.hpp"
#include "mfos/risk.hpp"

using namespace mfos;
using testgen::Gen;

TEST_SUITE("risk") {
  TEST_CASE("expected shortfall: optimization and quantile forms agree") {
    for (int c = 0; c < 200; ++c) {
      Gen g(51, c);
      const auto m = testgen::measure(g, 1, 9);
      const double alpha = g.uniform(0.05, 0.95);
      CAPTURE(c);
      CHECK(std::abs(expected_shortfall(m, alpha) - expected_shortfall_quantile(m, alpha)) < 1e-12);
    }
  }

  TEST_CASE("expected shortfall of a point mass is the point") {
    const auto m = make_empirical_1d(std::vector<double>{0.7}, std::vector<int>{1});
    for (double a : {0.1, 0.5, 0.9}) CHECK(expected_shortfall(m, a) == doctest::Approx(0.7));
  }

  TEST_CASE("distortion: closed form against layer-cake quadrature") {
    const Payoff put = Payoff::put(1.0);
    for (int c = 0; c < 100; ++c) {
      Gen g(52, c);
      const auto m = testgen::measure(g, 1, 7);
      Distortion phi;
      phi.kind = g.below(2) ? Distortion::Kind::power : Distortion::Kind::exponential;
      phi.param = phi.kind == Distortion::Kind::power ? g.uniform(0.2, 1.0) : g.uniform(0.2, 3.0);
      CAPTURE(c);
      CHECK(std::abs(distortion_g(m, phi, put) - distortion_g_quadrature(m, phi, put)) < 1e-10);
    }
  }

  TEST_CASE("identity distortion is the expectation") {
    Gen g(53, 0);
    const auto m = testgen::measure(g, 1, 8);
    Distortion id;
    id.kind = Distortion::Kind::identity;
    const Payoff put = Payoff::put(0.5);
    CHECK(distortion_g(m, id, put) == doctest::Approx(expected_payoff(m, put)).epsilon(1e-13));
  }

  TEST_CASE("concave distortion weights the upper tail more") {
    for (int c = 0; c < 100; ++c) {
      Gen g(54, c);
      const auto m = testgen::measure(g, 1, 7);
      Distortion phi;
      phi.param = g.uniform(0.2, 0.99);
      CHECK(distortion_g(m, phi, Payoff::put(2.5)) >= expected_payoff(m, Payoff::put(2.5)) - 1e-12);
    }
  }

  TEST_CASE("mean-variance") {
    const auto m = make_empirical_1d(std::vector<double>{0.0, 2.0}, std::vector<int>{1, 0});
    CHECK(mean_variance_g(m, 0.0) == doctest::Approx(1.0));
    CHECK(mean_variance_g(m, 0.5) == doctest::Approx(0.75));
  }

  TEST_CASE("payoff lipschitz constants") {
    CHECK(Payoff::put(1.0).lipschitz() == 1.0);
    CHECK(Payoff::quadratic(0, 2, 0).lipschitz() == 2.0);
    CHECK(std::isinf(Payoff::quadratic(0, 0, 1).lipschitz()));
  }

  // Spreading a law raises its upper-tail average, so with zero drift the
  // minimizing rule stops at once.
  TEST_CASE("driftless expected shortfall example stops at once") {
    const auto m = make_empirical_1d(std::vector<double>{-0.5, 0.4, 1.5}, std::vector<int>{1, 1, 1});
    const auto r = expected_shortfall_value(m, make_problem(standard_put_spec()), 0.7, BetaSearch{}, PdeConfig{});
    CHECK(r.value == doctest::Approx(expected_shortfall(m, 0.7)).epsilon(1e-8));
  }

  // Stopping at once is feasible, so the minimized value never exceeds it.
  TEST_CASE("expected shortfall example is bounded by stopping now") {
    PdeConfig pde;
    pde.x_min = -8;
    pde.x_max = 10;
    for (int c = 0; c < 4; ++c) {
      Gen g(55, c);
      ProblemSpec s = standard_put_spec();
      s.drift = constant_drift(g.uniform(-1.0, 1.0));
      const auto m = testgen::measure(g, 1, 5);
      const double alpha = g.uniform(0.2, 0.9);
      const auto r = expected_shortfall_value(m, make_problem(s), alpha, BetaSearch{}, pde);
      CAPTURE(c);
      CHECK(r.value <= expected_shortfall(m, alpha) + 1e-9);
    }
  }
}
