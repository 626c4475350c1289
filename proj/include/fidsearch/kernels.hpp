#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Inner-loop arithmetic for clustering and summary statistics. Every kernel
// has a portable scalar reference; vector variants are picked at runtime from
// what the CPU reports and must agree with the reference to round-off.
// Inputs are float32 feature rows; accumulation is always in double.
namespace fidsearch::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct Nearest {
  std::size_t index;
  double distance;  // squared L2
};

struct KernelTable {
  double (*squared_distance)(const float* a, const float* b, std::size_t d);
  void (*accumulate)(double* acc, const float* x, std::size_t d);
  Nearest (*nearest)(const float* x, const float* centroids, std::size_t k, std::size_t d);
};

// Per-ISA tables. Only ISAs compiled for this target are non-null.
const KernelTable& scalar_table();
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool isa_available(Isa isa);
std::vector<Isa> available_isas();

// Best available ISA, unless FIDSEARCH_ISA=scalar|avx2|neon overrides it.
Isa active_isa();
// Pins the dispatched ISA (tests, benchmarks). Returns false if unavailable.
bool set_isa(Isa isa);
const KernelTable& active();

inline double squared_distance(const float* a, const float* b, std::size_t d) {
  return active().squared_distance(a, b, d);
}
inline void accumulate(double* acc, const float* x, std::size_t d) { active().accumulate(acc, x, d); }
// Lowest-index centroid among ties.
inline Nearest nearest(const float* x, const float* centroids, std::size_t k, std::size_t d) {
  return active().nearest(x, centroids, k, d);
}

}  // namespace fidsearch::kernels
