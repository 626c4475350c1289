#include <limits>

#include "fidsearch/kernels.hpp"

namespace fidsearch::kernels {
namespace {

double squared_distance_scalar(const float* a, const float* b, std::size_t d) {
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += diff * diff;
  }
  return sum;
}

void accumulate_scalar(double* acc, const float* x, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) acc[i] += static_cast<double>(x[i]);
}

Nearest nearest_scalar(const float* x, const float* centroids, std::size_t k, std::size_t d) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < k; ++c) {
    const double dist = squared_distance_scalar(x, centroids + c * d, d);
    if (dist < best.distance) best = {c, dist};
  }
  return best;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{squared_distance_scalar, accumulate_scalar, nearest_scalar};
  return table;
}

}  // namespace fidsearch::kernels
