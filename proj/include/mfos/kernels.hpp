#pragma once

#include <cstddef>
#include <cstdint>

#include "mfos/problem.hpp"

namespace mfos::kernels {

/// One Euler-Maruyama step for n particles of dimension d (row-major n x d).
/// Particles with alive[p] == 0 are copied unchanged. Throws NumericalError
/// on a non-finite update.
void euler_serial(int d, std::size_t n, const double* x, const double* alive, const double* noise,
                  const LocalCoefficients& c, double dt, double* out);

/// OpenMP version of euler_serial; bit-identical output.
void euler_parallel(int d, std::size_t n, const double* x, const double* alive, const double* noise,
                    const LocalCoefficients& c, double dt, double* out);

/// Standard normal draws for step `step`, addressed by (seed, particle, step).
void gaussian_noise(std::uint64_t seed, int d, std::size_t n, int step, double* out);

}  // namespace mfos::kernels
