#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "mfos/dynamics.hpp"
#include "mfos/examples.hpp"
#include "mfos/kernels.hpp"

using namespace mfos;

namespace {

struct StepFixture {
  int d;
  std::size_t n;
  std::vector<double> x, alive, noise, out;
  Problem problem;

  StepFixture(int d_, std::size_t n_) : d(d_), n(n_), x(n_ * d_), alive(n_, 1.0), noise(n_ * d_), out(n_ * d_) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = 0.001 * static_cast<double>(k % 2000) - 1.0;
    for (std::size_t p = 0; p < n; p += 5) alive[p] = 0.0;
    kernels::gaussian_noise(1, d, n, 0, noise.data());
    ProblemSpec s;
    s.d = d;
    s.drift.kind = DriftSpec::Kind::mean_reverting;
    s.drift.kappa = 0.5;
    s.vol = gbm_vol(0.3);
    problem = make_problem(s);
  }
};

template <bool Parallel>
void BM_euler(benchmark::State& state) {
  StepFixture f(static_cast<int>(state.range(1)), static_cast<std::size_t>(state.range(0)));
  const auto c = f.problem.at(0.0, {});
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::euler_parallel(f.d, f.n, f.x.data(), f.alive.data(), f.noise.data(), c, 0.01, f.out.data());
    } else {
      kernels::euler_serial(f.d, f.n, f.x.data(), f.alive.data(), f.noise.data(), c, 0.01, f.out.data());
    }
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.n));
  state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

void BM_noise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> z(n);
  for (auto _ : state) {
    kernels::gaussian_noise(7, 1, n, 3, z.data());
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_simulate(benchmark::State& state) {
  const Exec exec = state.range(1) ? Exec::parallel : Exec::serial;
  const auto m = make_empirical_1d(std::vector<double>{-0.5, 0.4, 1.5, 0.8}, std::vector<int>{1, 1, 1, 0});
  const Problem p = make_problem(standard_put_spec());
  const auto grid = TimeGrid::uniform(1.0, 20);
  const auto ppa = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_unstopped(m, p, grid, ppa, 11, exec).x.data());
  state.SetItemsProcessed(state.iterations() * 4 * ppa * grid.n);
}

}  // namespace

BENCHMARK(BM_euler<false>)->ArgsProduct({{1 << 10, 1 << 14, 1 << 18}, {1, 3}})->Name("euler/serial");
BENCHMARK(BM_euler<true>)->ArgsProduct({{1 << 10, 1 << 14, 1 << 18}, {1, 3}})->Name("euler/parallel");
BENCHMARK(BM_noise)->Arg(1 << 16);
BENCHMARK(BM_simulate)->ArgsProduct({{1000, 10000}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
