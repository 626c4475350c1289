#include "fidsearch/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <limits>

namespace fidsearch::kernels {
namespace {

double squared_distance_neon(const float* a, const float* b, std::size_t d) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    float32x4_t va = vld1q_f32(a + i);
    float32x4_t vb = vld1q_f32(b + i);
    float64x2_t d0 = vsubq_f64(vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
    float64x2_t d1 = vsubq_f64(vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
    acc0 = vfmaq_f64(acc0, d0, d0);
    acc1 = vfmaq_f64(acc1, d1, d1);
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < d; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += diff * diff;
  }
  return sum;
}

void accumulate_neon(double* acc, const float* x, std::size_t d) {
  std::size_t i = 0;
  for (; i + 4 <= d; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vcvt_f64_f32(vget_low_f32(v))));
    vst1q_f64(acc + i + 2, vaddq_f64(vld1q_f64(acc + i + 2), vcvt_high_f64_f32(v)));
  }
  for (; i < d; ++i) acc[i] += static_cast<double>(x[i]);
}

Nearest nearest_neon(const float* x, const float* centroids, std::size_t k, std::size_t d) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < k; ++c) {
    const double dist = squared_distance_neon(x, centroids + c * d, d);
    if (dist < best.distance) best = {c, dist};
  }
  return best;
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{squared_distance_neon, accumulate_neon, nearest_neon};
  return &table;
}

}  // namespace fidsearch::kernels

#else

namespace fidsearch::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace fidsearch::kernels

#endif
