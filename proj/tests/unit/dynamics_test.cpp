#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "gen.hpp"
#include "mfos/dynamics.hpp"
#include "mfos/examples.hpp"
#include "mfos/kernels.hpp"
#include "mfos/policy.hpp"

using namespace mfos;
using testgen::Gen;

namespace {

EmpiricalMeasure four_atoms() {
  return make_empirical_1d(std::vector<double>{-0.5, 0.4, 1.5, 0.8}, std::vector<int>{1, 1, 1, 0},
                           std::vector<double>{0.3, 0.3, 0.2, 0.2});
}

ProblemSpec ou_2d() {
  ProblemSpec s;
  s.d = 2;
  s.drift.kind = DriftSpec::Kind::mean_reverting;
  s.drift.kappa = 0.7;
  s.drift.theta = Point{0.2, -0.1, 0.0};
  s.vol = constant_vol(0.4);
  s.terminal.kind = TerminalSpec::Kind::expectation;
  s.terminal.psi = Payoff::put(0.0);
  return s;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("serial and parallel euler kernels are bit-identical") {
    for (int c = 0; c < 20; ++c) {
      Gen g(31, c);
      const int d = 1 + g.below(3);
      const std::size_t n = 1 + g.below(3000);
      std::vector<double> x(n * d), alive(n), noise(n * d), a(n * d), b(n * d);
      for (auto& v : x) v = g.uniform(-3, 3);
      for (auto& v : alive) v = g.below(3) == 0 ? 0.0 : 1.0;
      kernels::gaussian_noise(c, d, n, 0, noise.data());
      ProblemSpec s;
      s.d = d;
      s.drift.kind = DriftSpec::Kind::affine;
      for (int k = 0; k < d; ++k) s.drift.a[k * kMaxDim + k] = -0.3 * (k + 1);
      s.vol = gbm_vol(0.5);
      const Problem p = make_problem(s);
      const auto coeff = p.at(0.0, {});
      kernels::euler_serial(d, n, x.data(), alive.data(), noise.data(), coeff, 0.01, a.data());
      kernels::euler_parallel(d, n, x.data(), alive.data(), noise.data(), coeff, 0.01, b.data());
      CAPTURE(c);
      CHECK(same_bits(a, b));
      for (std::size_t q = 0; q < n; ++q) {
        if (alive[q] == 0.0) {
          for (int k = 0; k < d; ++k) REQUIRE(a[q * d + k] == x[q * d + k]);
        }
      }
    }
  }

  TEST_CASE("simulation does not depend on execution mode") {
    const Problem p = make_problem(ou_2d());
    std::vector<Site> sites{{Point{0.1, 0.2, 0}, 1}, {Point{-0.4, 0.0, 0}, 1}, {Point{1.0, 1.0, 0}, 0}};
    const auto m = make_empirical(2, sites);
    const auto grid = TimeGrid::uniform(1.0, 16);
    const StopRule rule = [](int k, const Point& x) { return k > 3 && x[0] < -0.5 ? 0.0 : 1.0; };
    const auto a = simulate(m, p, grid, 500, 77, rule, Exec::serial);
    const auto b = simulate(m, p, grid, 500, 77, rule, Exec::parallel);
    CHECK(same_bits(a.x, b.x));
    CHECK(same_bits(a.alive, b.alive));
  }

  TEST_CASE("replaying a stop rule on unstopped paths matches full simulation") {
    const Problem p = make_problem(standard_put_spec(1.0, 1.0, 1.0));
    const auto grid = TimeGrid::uniform(1.0, 20);
    const auto m = four_atoms();
    const auto pol = Policy::threshold(std::vector<double>(20, -0.2), true);
    const auto full = simulate(m, p, grid, 400, 5, pol.rule());
    const auto base = simulate_unstopped(m, p, grid, 400, 5);
    const auto alive = replay_alive(base, pol.rule());
    CHECK(same_bits(full.alive, alive));
    CHECK(objective(full, full.alive, p) == objective(base, alive, p));
  }

  TEST_CASE("stopped particles keep their positions") {
    const Problem p = make_problem(standard_put_spec(1.0, 1.0, 1.0));
    const auto grid = TimeGrid::uniform(1.0, 10);
    const auto b = simulate(four_atoms(), p, grid, 50, 3, Policy::stop_at(10, 4).rule());
    for (std::size_t q = 0; q < b.N; ++q) {
      for (int k = 5; k <= 10; ++k) REQUIRE(b.position(k, q)[0] == b.position(4, q)[0]);
    }
  }

  TEST_CASE("survivor mass is non-increasing along a simulation") {
    const Problem p = make_problem(ou_2d());
    const auto m = make_empirical(2, std::vector<Site>{{Point{0, 0, 0}, 1}, {Point{1, -1, 0}, 1}});
    const auto grid = TimeGrid::uniform(1.0, 12);
    const StopRule rule = [](int, const Point& x) { return x[1] > 0.0 ? 0.5 : 1.0; };
    const auto b = simulate(m, p, grid, 300, 8, rule);
    double prev = 2.0;
    for (int k = 0; k <= grid.n; ++k) {
      const double s = surviving_mass(snapshot_atoms(b, k));
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }

  TEST_CASE("dump round trip keeps provenance") {
    const Problem p = make_problem(ou_2d());
    const auto m = make_empirical(2, std::vector<Site>{{Point{0, 0, 0}, 1}, {Point{1, -1, 0}, 0}});
    const auto b = simulate_unstopped(m, p, TimeGrid::uniform(0.5, 5), 20, 99);
    std::stringstream s;
    write_path_bundle(s, b, DumpTag{0x1234abcdULL, "9.9.9"});
    DumpTag tag;
    const auto back = read_path_bundle(s, &tag);
    CHECK(tag.config_hash == 0x1234abcdULL);
    CHECK(tag.version == "9.9.9");
    CHECK(back.N == b.N);
    CHECK(back.d == 2);
    CHECK(back.seed == 99);
    CHECK(back.grid.n == 5);
    CHECK(same_bits(back.x, b.x));
    CHECK(same_bits(back.alive, b.alive));
    CHECK(same_bits(back.w0, b.w0));
  }

  TEST_CASE("corrupt dumps are rejected") {
    const auto b = simulate_unstopped(four_atoms(), make_problem(standard_put_spec()), TimeGrid::uniform(1, 2), 3, 1);
    std::stringstream s;
    write_path_bundle(s, b);
    std::string bytes = s.str();
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    std::stringstream in1(bad_magic), in2(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS(read_path_bundle(in1));
    CHECK_THROWS(read_path_bundle(in2));
  }
}
