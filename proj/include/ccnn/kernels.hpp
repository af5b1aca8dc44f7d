// SPDX-License-Identifier: Apache-2.0
#pragma once

// Arithmetic inner loops of the network and optimizer.
//
// Every kernel has a scalar reference implementation; wider variants are
// selected at runtime from what the CPU reports. Elementwise kernels
// (axpy, scale, adam_step) produce bit-identical results across variants.
// Reductions (dot, row_scores) reassociate the sum and agree with the
// reference to a few ulps of the summed magnitudes.

#include <cstddef>
#include <string_view>
#include <vector>

namespace ccnn::kernels {

struct AdamStep {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  ///< 1 - beta1^t
  double bias_correction2;  ///< 1 - beta2^t
};

/// Function table for one instruction-set variant.
struct KernelSet {
  std::string_view name;

  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);

  /// out[r * n_filters + f] = dot(rows[r], filters[f]) for row-major inputs
  /// of width dim.
  void (*row_scores)(const double* rows, std::size_t n_rows, const double* filters,
                     std::size_t n_filters, std::size_t dim, double* out);

  /// In-place Adam update of params from grads using first/second moments.
  void (*adam_step)(const AdamStep& step, const double* grads, double* params, double* m,
                    double* v, std::size_t n);
};

const KernelSet& scalar_kernels();

/// Variants compiled into this build that the running CPU supports,
/// scalar first.
std::vector<const KernelSet*> available_kernels();

/// Kernel set used by the library. Defaults to the widest available
/// variant; the CCNN_KERNELS environment variable ("scalar", "avx2",
/// "auto") overrides the default on first use.
const KernelSet& active();

/// Select a variant by name ("auto" picks the widest). Throws
/// ccnn::Error(usage) for unknown or unsupported names.
void select(std::string_view name);

}  // namespace ccnn::kernels
