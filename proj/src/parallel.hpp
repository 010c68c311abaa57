#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>

namespace mfos::detail {

// Runs body(i) for i in [0, n) under OpenMP, rethrowing the first failure.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
  std::exception_ptr err;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(mfos_parallel_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace mfos::detail
