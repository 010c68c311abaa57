#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mfos/measure.hpp"
#include "mfos/problem.hpp"

namespace mfos {

/// Particle trajectories on a TimeGrid with relaxed survival weights.
///
/// Particle p carries initial weight w0[p]; alive(k, p) is its surviving
/// weight after the stop decision at node k. Stop-then-diffuse: the decision
/// at node k is taken before the step k -> k+1, and at the terminal node every
/// particle stops. Mass leaving the survivors at node k is deposited, frozen,
/// at x(k, p). A particle whose alive weight reaches 0 no longer moves.
struct PathBundle {
  int d = 1;
  std::size_t N = 0;
  TimeGrid grid{};
  std::uint64_t seed = 0;
  std::vector<double> x;         // (n+1) * N * d
  std::vector<double> alive;     // (n+1) * N
  std::vector<double> running;   // n * N: f(t_k, x_k, m_k) at the post-stop snapshot
  std::vector<double> w0;        // N
  std::vector<double> alive0;    // N: initial survivor weight (w0 or 0)
  std::vector<std::uint32_t> source;  // N: index of the spawning atom

  int steps() const { return grid.n; }
  Point position(int k, std::size_t p) const;
  double* xs(int k) { return x.data() + static_cast<std::size_t>(k) * N * d; }
  const double* xs(int k) const { return x.data() + static_cast<std::size_t>(k) * N * d; }
};

/// Atoms of the law at node k for a given alive table ((n+1) * N): survivors
/// (x_k, 1, alive) plus every deposit made at nodes <= k (post_stop) or < k.
/// Zero weights are skipped; atoms are not merged.
std::vector<Atom> snapshot_atoms(const PathBundle& b, std::span<const double> alive, int k, bool post_stop = true);
inline std::vector<Atom> snapshot_atoms(const PathBundle& b, int k, bool post_stop = true) {
  return snapshot_atoms(b, b.alive, k, post_stop);
}

/// Survival probability for node k at position x.
using StopRule = std::function<double(int k, const Point& x)>;

/// Execution choice for the particle kernels.
enum class Exec { serial, parallel };

/// Node-0 particles: each atom spawns `paths_per_atom` particles of weight
/// w / paths_per_atom. Positions at later nodes are left zero.
PathBundle spawn_particles(const EmpiricalMeasure& m0, const TimeGrid& grid, int paths_per_atom, std::uint64_t seed);

/// Advances node k to node k+1 with the given N x d standard normal draws,
/// using the measure snapshot at node k (post-stop). Records f at node k.
void euler_step(PathBundle& b, int k, const Problem& problem, std::span<const double> noise,
                Exec exec = Exec::parallel);

/// Never stops before T; every flag drops at the terminal node.
PathBundle simulate_unstopped(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              int paths_per_atom, std::uint64_t seed, Exec exec = Exec::parallel);

/// Full simulation applying `rule` at nodes 0..n-1 before each diffusion step.
PathBundle simulate(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                    int paths_per_atom, std::uint64_t seed, const StopRule& rule, Exec exec = Exec::parallel);

/// Survival probability for particle p at node k.
using ParticleStopRule = std::function<double(int k, std::size_t p, const Point& x)>;

/// simulate() with a rule that may depend on the particle index; `last_node`
/// < n stops the run after the decision at that node (later nodes untouched).
PathBundle simulate_particles(const EmpiricalMeasure& m0, const Problem& problem, const TimeGrid& grid,
                              int paths_per_atom, std::uint64_t seed, const ParticleStopRule& rule,
                              Exec exec = Exec::parallel, int last_node = -1);

/// Alive table obtained by applying `rule` to the stored positions; for
/// measure-independent problems this reproduces simulate() path for path.
std::vector<double> replay_alive(const PathBundle& unstopped, const StopRule& rule);

/// Sum_k dt Sum_p alive f + g(terminal law), with optional per-particle
/// multipliers (bootstrap resampling).
double objective(const PathBundle& b, std::span<const double> alive, const Problem& problem,
                 std::span<const double> multiplier = {});

/// Provenance stored in a dump header.
struct DumpTag {
  std::uint64_t config_hash = 0;
  std::string version;
};

/// Binary dump: magic "MFOSPB01", u32 version (2), u32 d, u64 N, u32 nodes,
/// u64 seed, f64 t0, f64 T, u64 config hash, u32 byte length + version text;
/// then for each node N*d positions and N alive weights; then N initial
/// weights and N initial survivor weights. Little-endian throughout.
void write_path_bundle(std::ostream& out, const PathBundle& b, const DumpTag& tag = {});
PathBundle read_path_bundle(std::istream& in, DumpTag* tag = nullptr);

}  // namespace mfos
