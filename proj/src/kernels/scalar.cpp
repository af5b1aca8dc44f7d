// SPDX-License-Identifier: Apache-2.0
#include "ccnn/kernels.hpp"

#include <cmath>

#include "kernel_variants.hpp"

namespace ccnn::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void row_scores_scalar(const double* rows, std::size_t n_rows, const double* filters,
                       std::size_t n_filters, std::size_t dim, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* row = rows + r * dim;
    for (std::size_t f = 0; f < n_filters; ++f) {
      out[r * n_filters + f] = dot_scalar(row, filters + f * dim, dim);
    }
  }
}

void adam_step_scalar(const AdamStep& s, const double* grads, double* params, double* m,
                      double* v, std::size_t n) {
  const double one_minus_b1 = 1.0 - s.beta1;
  const double one_minus_b2 = 1.0 - s.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = s.beta1 * m[i] + one_minus_b1 * g;
    v[i] = s.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / s.bias_correction1;
    const double v_hat = v[i] / s.bias_correction2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{"scalar",        dot_scalar,      axpy_scalar, scale_scalar,
                             row_scores_scalar, adam_step_scalar};
  return set;
}

}  // namespace ccnn::kernels
