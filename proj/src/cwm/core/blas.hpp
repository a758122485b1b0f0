#pragma once

#include "cwm/core/scalar.hpp"

namespace cwm::blas {

/// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha, const real* a,
          index_t lda, const real* b, index_t ldb, real beta, real* c, index_t ldc);

}  // namespace cwm::blas
