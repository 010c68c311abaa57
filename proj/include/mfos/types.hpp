#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace mfos {

/// Largest supported spatial dimension.
inline constexpr int kMaxDim = 3;

/// Spatial point; only the first `d` coordinates are meaningful.
using Point = std::array<double, kMaxDim>;

/// Row-major d x d matrix padded to kMaxDim x kMaxDim.
using Matrix = std::array<double, kMaxDim * kMaxDim>;

inline Point point1(double x) { return Point{x, 0.0, 0.0}; }

/// Raised when a numerical routine cannot meet its contract (non-convergence,
/// size limits, non-finite intermediate values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfos
