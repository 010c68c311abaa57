#include "mfos/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mfos/kernels.hpp"

namespace mfos {
namespace {

constexpr char kMagic[8] = {'M', 'F', 'O', 'S', 'P', 'B', '0', '1'};
constexpr std::uint32_t kDumpVersion = 2;

double checked_survival(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("stop rule returned a value outside [0,1]");
  return p;
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "dump format assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated path bundle dump");
  return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated path bundle dump");
}

}  // namespace

Point PathBundle::position(int k, std::size_t p) const {
  Point out{};
  const double* src = xs(k) + p * d;
  for (int r = 0; r < d; ++r) out[r] = src[r];
  return out;
}

std::vector<Atom> snapshot_atoms(const PathBundle& b, std::span<const double> alive, int k, bool post_stop) {
  const std::size_t N = b.N;
  std::vector<Atom> atoms;
  atoms.reserve(2 * N);
  const int last_deposit = post_stop ? k : k - 1;
  for (std::size_t p = 0; p < N; ++p) {
    const double surv = post_stop ? alive[k * N + p] : (k == 0 ? b.alive0[p] : alive[(k - 1) * N + p]);
    if (surv > 0.0) atoms.push_back({b.position(k, p), 1, surv});
  }
  for (int j = 0; j <= last_deposit; ++j) {
    for (std::size_t p = 0; p < N; ++p) {
      const double before = j == 0 ? b.w0[p] : alive[(j - 1) * N + p];
      const double dep = before - alive[j * N + p];
      if (dep > 0.0) atoms.push_back({b.position(j, p), 0, dep});
    }
  }
  return atoms;
}

PathBundle spawn_particles(const EmpiricalMeasure& m0, const TimeGrid& grid, int paths_per_atom, std::uint64_t seed) {
  if (paths_per_atom < 1) throw std::invalid_argument("paths_per_atom must be >= 1");
  if (m0.empty()) throw std::invalid_argument("initial measure is empty");
  PathBundle b;
  b.d = m0.dim();
  b.N = m0.size() * static_cast<std::size_t>(paths_per_atom);
  b.grid = grid;
  b.seed = seed;
  const std::size_t nodes = static_cast<std::size_t>(grid.n) + 1;
  b.x.assign(nodes * b.N * b.d, 0.0);
  b.alive.assign(nodes * b.N, 0.0);
  b.running.assign(static_cast<std::size_t>(grid.n) * b.N, 0.0);
  b.w0.resize(b.N);
  b.alive0.resize(b.N);
  b.source.resize(b.N);
  std::size_t p = 0;
  for (std::size_t a = 0; a < m0.size(); ++a) {
    const Atom& at = m0[a];
    for (int r = 0; r < paths_per_atom; ++r, ++p) {
      for (int c = 0; c < b.d; ++c) b.x[p * b.d + c] = at.x[c];
      b.w0[p] = at.w / paths_per_atom;
      b.alive0[p] = at.i == 1 ? b.w0[p] : 0.0;
      b.source[p] = static_cast<std::uint32_t>(a);
    }
  }
  return b;
}

void euler_step(PathBundle& b, int k, const Problem& problem, std::span<const double> noise, Exec exec) {
  if (k < 0 || k >= b.grid.n) throw std::invalid_argument("euler_step: step index out of range");
  if (noise.size() != b.N * b.d) throw std::invalid_argument("euler_step: noise must be N x d");
  const double t = b.grid.node(k);
  const LocalCoefficients c =
      problem.measure_dependent ? problem.at(t, snapshot_atoms(b, k, true)) : problem.at(t, MeasureView{});
  const double* alive = b.alive.data() + static_cast<std::size_t>(k) * b.N;
  double* f = b.running.data() + static_cast<std::size_t>(k) * b.N;
  for (std::size_t p = 0; p < b.N; ++p) {
    f[p] = c.running(b.position(k, p));
    if (!std::isfinite(f[p])) throw NumericalError("running reward is not finite");
  }
  if (exec == Exec::serial) {
    kernels::euler_serial(b.d, b.N, b.xs(k), alive, noise.data(), c, b.grid.dt(), b.xs(k + 1));
  } else {
    kernels::euler_parallel(b.d, b.N, b.xs(k), alive, noise.data(), c, b.grid.dt(), b.xs(k + 1));
  }
}

PathBundle simulate_unstopped(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              int paths_per_atom, std::uint64_t seed, Exec exec) {
  return simulate(m0, problem, grid, paths_per_atom, seed, [](int, const Point&) { return 1.0; }, exec);
}

PathBundle simulate(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                    int paths_per_atom, std::uint64_t seed, const StopRule& rule, Exec exec) {
  return simulate_particles(
      m0, problem, grid, paths_per_atom, seed,
      [&rule](int k, std::size_t, const Point& x) { return rule(k, x); }, exec);
}

PathBundle simulate_particles(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              int paths_per_atom, std::uint64_t seed, const ParticleStopRule& rule,
                              Exec exec, int last_node) {
  if (m0.dim() != problem.d) throw std::invalid_argument("simulate: measure and problem dimensions differ");
  PathBundle b = spawn_particles(m0, grid, paths_per_atom, seed);
  const std::size_t N = b.N;
  const int stop_after = last_node < 0 ? grid.n - 1 : std::min(last_node, grid.n - 1);
  std::vector<double> noise(N * b.d);
  for (int k = 0; k <= stop_after; ++k) {
    const double* prev = k == 0 ? b.alive0.data() : b.alive.data() + (k - 1) * N;
    double* cur = b.alive.data() + static_cast<std::size_t>(k) * N;
    for (std::size_t p = 0; p < N; ++p) {
      cur[p] = prev[p] > 0.0 ? prev[p] * checked_survival(rule(k, p, b.position(k, p))) : 0.0;
    }
    kernels::gaussian_noise(seed, b.d, N, k, noise.data());
    euler_step(b, k, problem, noise, exec);
  }
  return b;
}

std::vector<double> replay_alive(const PathBundle& unstopped, const StopRule& rule) {
  const std::size_t N = unstopped.N;
  const int n = unstopped.grid.n;
  std::vector<double> alive((static_cast<std::size_t>(n) + 1) * N, 0.0);
  for (int k = 0; k < n; ++k) {
    const double* prev = k == 0 ? unstopped.alive0.data() : alive.data() + (k - 1) * N;
    double* cur = alive.data() + static_cast<std::size_t>(k) * N;
    for (std::size_t p = 0; p < N; ++p) {
      cur[p] = prev[p] > 0.0 ? prev[p] * checked_survival(rule(k, unstopped.position(k, p))) : 0.0;
    }
  }
  return alive;
}

double objective(const PathBundle& b, std::span<const double> alive, const Problem& problem,
                 std::span<const double> multiplier) {
  const std::size_t N = b.N;
  const int n = b.grid.n;
  const bool scaled = !multiplier.empty();
  double run = 0.0;
  for (int k = 0; k < n; ++k) {
    const double* a = alive.data() + static_cast<std::size_t>(k) * N;
    const double* f = b.running.data() + static_cast<std::size_t>(k) * N;
    double s = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
      if (a[p] > 0.0) s += (scaled ? multiplier[p] : 1.0) * a[p] * f[p];
    }
    run += b.grid.dt() * s;
  }
  std::vector<Atom> terminal = snapshot_atoms(b, alive, n, true);
  if (scaled) {
    // Deposits are emitted node by node in particle order; recover p per atom.
    std::size_t idx = 0;
    for (int j = 0; j <= n; ++j) {
      for (std::size_t p = 0; p < N; ++p) {
        const double before = j == 0 ? b.w0[p] : alive[(j - 1) * N + p];
        if (before - alive[j * N + p] > 0.0) terminal[idx++].w *= multiplier[p];
      }
    }
    std::erase_if(terminal, [](const Atom& a) { return !(a.w > 0.0); });
  }
  const double g = problem.g(terminal);
  if (!std::isfinite(g) || !std::isfinite(run)) throw NumericalError("objective is not finite");
  return run + g;
}

void write_path_bundle(std::ostream& out, const PathBundle& b, const DumpTag& tag) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kDumpVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(b.d));
  put<std::uint64_t>(out, b.N);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(b.grid.n + 1));
  put<std::uint64_t>(out, b.seed);
  put<double>(out, b.grid.t0);
  put<double>(out, b.grid.horizon);
  put<std::uint64_t>(out, tag.config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tag.version.size()));
  out.write(tag.version.data(), static_cast<std::streamsize>(tag.version.size()));
  for (int k = 0; k <= b.grid.n; ++k) {
    put_doubles(out, b.xs(k), b.N * b.d);
    put_doubles(out, b.alive.data() + static_cast<std::size_t>(k) * b.N, b.N);
  }
  put_doubles(out, b.w0.data(), b.N);
  put_doubles(out, b.alive0.data(), b.N);
  if (!out) throw std::runtime_error("failed writing path bundle dump");
}

PathBundle read_path_bundle(std::istream& in, DumpTag* tag) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a path bundle dump");
  if (get<std::uint32_t>(in) != kDumpVersion) throw std::runtime_error("unsupported path bundle dump version");
  PathBundle b;
  b.d = static_cast<int>(get<std::uint32_t>(in));
  b.N = get<std::uint64_t>(in);
  const auto nodes = get<std::uint32_t>(in);
  b.seed = get<std::uint64_t>(in);
  const double t0 = get<double>(in);
  const double T = get<double>(in);
  DumpTag t;
  t.config_hash = get<std::uint64_t>(in);
  const auto len = get<std::uint32_t>(in);
  if (len > 4096) throw std::runtime_error("corrupt path bundle header");
  t.version.resize(len);
  in.read(t.version.data(), len);
  if (!in) throw std::runtime_error("truncated path bundle dump");
  if (tag) *tag = t;
  if (b.d < 1 || b.d > kMaxDim || nodes < 2) throw std::runtime_error("corrupt path bundle header");
  b.grid = TimeGrid(t0, T, static_cast<int>(nodes) - 1);
  b.x.resize(nodes * b.N * b.d);
  b.alive.resize(nodes * b.N);
  for (std::uint32_t k = 0; k < nodes; ++k) {
    get_doubles(in, b.x.data() + k * b.N * b.d, b.N * b.d);
    get_doubles(in, b.alive.data() + k * b.N, b.N);
  }
  b.w0.resize(b.N);
  b.alive0.resize(b.N);
  get_doubles(in, b.w0.data(), b.N);
  get_doubles(in, b.alive0.data(), b.N);
  b.running.assign((nodes - 1) * b.N, 0.0);
  b.source.assign(b.N, 0);
  return b;
}

}  // namespace mfos
