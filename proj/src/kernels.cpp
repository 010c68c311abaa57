#include "mfos/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "mfos/rng.hpp"

namespace mfos::kernels {
namespace {

// Returns false on a non-finite result.
inline bool step_one(int d, const double* x, double alive, const double* xi, const LocalCoefficients& c,
                     double dt, double sqdt, double* out) {
  if (!(alive > 0.0)) {
    for (int r = 0; r < d; ++r) out[r] = x[r];
    return true;
  }
  Point p{};
  for (int r = 0; r < d; ++r) p[r] = x[r];
  const Point b = c.drift(p);
  const Matrix s = c.vol(p);
  bool ok = true;
  for (int r = 0; r < d; ++r) {
    double diff = 0.0;
    for (int k = 0; k < d; ++k) diff += s[r * kMaxDim + k] * xi[k];
    out[r] = x[r] + b[r] * dt + diff * sqdt;
    ok = ok && std::isfinite(out[r]);
  }
  return ok;
}

}  // namespace

void euler_serial(int d, std::size_t n, const double* x, const double* alive, const double* noise,
                  const LocalCoefficients& c, double dt, double* out) {
  const double sqdt = std::sqrt(dt);
  for (std::size_t p = 0; p < n; ++p) {
    if (!step_one(d, x + p * d, alive[p], noise + p * d, c, dt, sqdt, out + p * d)) {
      throw NumericalError("euler step produced a non-finite state");
    }
  }
}

void euler_parallel(int d, std::size_t n, const double* x, const double* alive, const double* noise,
                    const LocalCoefficients& c, double dt, double* out) {
  const double sqdt = std::sqrt(dt);
  const auto count = static_cast<std::int64_t>(n);
  int bad = 0;
#pragma omp parallel for schedule(static) reduction(| : bad)
  for (std::int64_t p = 0; p < count; ++p) {
    if (!step_one(d, x + p * d, alive[p], noise + p * d, c, dt, sqdt, out + p * d)) bad |= 1;
  }
  if (bad) throw NumericalError("euler step produced a non-finite state");
}

void gaussian_noise(std::uint64_t seed, int d, std::size_t n, int step, double* out) {
  const CounterRng rng(seed);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < count; ++p) {
    for (int blk = 0; 2 * blk < d; ++blk) {
      const auto z = rng.normal2(static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(step),
                                 static_cast<std::uint32_t>(blk));
      out[p * d + 2 * blk] = z[0];
      if (2 * blk + 1 < d) out[p * d + 2 * blk + 1] = z[1];
    }
  }
}

}  // namespace mfos::kernels
