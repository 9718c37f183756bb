#pragma once

// Data-parallel loop helper. Every hot per-point / per-node kernel in the
// library takes an Exec argument: Exec::serial runs the plain reference loop
// (kept for tests and the benchmark), Exec::parallel runs the same body under
// OpenMP. Bodies must write only to their own index, so both paths produce
// bit-identical results.

#include <cstddef>
#include <exception>
#include <mutex>

namespace eimesh {

enum class Exec { serial, parallel };

// Caps the OpenMP worker count (<= 0 restores the runtime default).
void set_thread_count(int n);
int thread_count();

template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Exceptions may not escape an OpenMP region; keep the first and rethrow.
  std::exception_ptr first;
  std::mutex guard;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!first) first = std::current_exception();
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace eimesh
