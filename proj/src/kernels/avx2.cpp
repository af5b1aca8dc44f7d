// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA variants. Compiled with -mavx2 -mfma -ffp-contract=off; only
// reached after the dispatcher has confirmed CPU support. Elementwise
// kernels avoid fused multiply-add so they round exactly like the scalar
// reference; tails are delegated to the reference for the same reason.
#include <immintrin.h>

#include "ccnn/kernels.hpp"
#include "kernel_variants.hpp"

namespace ccnn::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  scalar_kernels().axpy(alpha, x + i, y + i, n - i);
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  }
  scalar_kernels().scale(alpha, x + i, n - i);
}

// Four filters per pass so each row chunk is loaded once per block.
void row_scores_avx2(const double* rows, std::size_t n_rows, const double* filters,
                     std::size_t n_filters, std::size_t dim, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* row = rows + r * dim;
    std::size_t f = 0;
    for (; f + 4 <= n_filters; f += 4) {
      const double* f0 = filters + f * dim;
      const double* f1 = f0 + dim;
      const double* f2 = f1 + dim;
      const double* f3 = f2 + dim;
      __m256d a0 = _mm256_setzero_pd();
      __m256d a1 = _mm256_setzero_pd();
      __m256d a2 = _mm256_setzero_pd();
      __m256d a3 = _mm256_setzero_pd();
      std::size_t i = 0;
      for (; i + 4 <= dim; i += 4) {
        const __m256d x = _mm256_loadu_pd(row + i);
        a0 = _mm256_fmadd_pd(x, _mm256_loadu_pd(f0 + i), a0);
        a1 = _mm256_fmadd_pd(x, _mm256_loadu_pd(f1 + i), a1);
        a2 = _mm256_fmadd_pd(x, _mm256_loadu_pd(f2 + i), a2);
        a3 = _mm256_fmadd_pd(x, _mm256_loadu_pd(f3 + i), a3);
      }
      double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
      for (; i < dim; ++i) {
        s0 += row[i] * f0[i];
        s1 += row[i] * f1[i];
        s2 += row[i] * f2[i];
        s3 += row[i] * f3[i];
      }
      double* o = out + r * n_filters + f;
      o[0] = s0;
      o[1] = s1;
      o[2] = s2;
      o[3] = s3;
    }
    for (; f < n_filters; ++f) {
      out[r * n_filters + f] = dot_avx2(row, filters + f * dim, dim);
    }
  }
}

void adam_step_avx2(const AdamStep& s, const double* grads, double* params, double* m, double* v,
                    std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(s.beta1);
  const __m256d b2 = _mm256_set1_pd(s.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d bc1 = _mm256_set1_pd(s.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(s.bias_correction2);
  const __m256d lr = _mm256_set1_pd(s.learning_rate);
  const __m256d eps = _mm256_set1_pd(s.epsilon);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grads + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
  }
  scalar_kernels().adam_step(s, grads + i, params + i, m + i, v + i, n - i);
}

}  // namespace

const KernelSet& avx2_kernels() {
  static const KernelSet set{"avx2",          dot_avx2,      axpy_avx2, scale_avx2,
                             row_scores_avx2, adam_step_avx2};
  return set;
}

}  // namespace ccnn::kernels
