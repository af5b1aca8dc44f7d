// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ccnn/kernels.hpp"

namespace ccnn::kernels {

#if defined(CCNN_WITH_AVX2)
const KernelSet& avx2_kernels();
#endif

}  // namespace ccnn::kernels
