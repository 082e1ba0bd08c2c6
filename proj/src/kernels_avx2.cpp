#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "raglab/kernels.hpp"

namespace raglab::kernels {

namespace {

// Sum of the 4 double lanes.
inline double hsum_pd(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d sum = _mm_add_pd(lo, hi);
  const __m128d shuf = _mm_unpackhi_pd(sum, sum);
  return _mm_cvtsd_f64(_mm_add_sd(sum, shuf));
}

}  // namespace

double dot_avx2(std::span<const float> a, std::span<const float> b) noexcept {
  const std::size_t n = a.size();
  const float* pa = a.data();
  const float* pb = b.data();

  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  const std::size_t simd_end = n & ~std::size_t{3};
  for (; i < simd_end; i += 4) {
    // Widen 4 floats to doubles so the accumulator matches the scalar kernel's
    // precision; the products themselves are exact in double.
    const __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(pa + i));
    const __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(pb + i));
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  double sum = hsum_pd(acc);
  for (; i < n; ++i) {
    sum += static_cast<double>(pa[i]) * static_cast<double>(pb[i]);
  }
  return sum;
}

void batch_dot_avx2(std::span<const float> query, const float* rows,
                    std::size_t row_count, std::size_t dim,
                    double* out) noexcept {
  for (std::size_t r = 0; r < row_count; ++r) {
    out[r] = dot_avx2(query, std::span<const float>(rows + r * dim, dim));
  }
}

}  // namespace raglab::kernels

#endif  // x86_64
