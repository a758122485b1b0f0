#include "cwm/core/blas.hpp"

#include <cblas.h>


namespace cwm::blas {

void gemm(bool trans_a, bool trans_b, index_t m, index_t n, index_t k, real alpha, const real* a,
          index_t lda, const real* b, index_t ldb, real beta, real* c, index_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (index_t i = 0; i < m; ++i)
      for (index_t j = 0; j < n; ++j) c[i * ldc + j] = beta == real(0) ? real(0) : beta * c[i * ldc + j];
    return;
  }
  const auto ta = trans_a ? CblasTrans : CblasNoTrans;
  const auto tb = trans_b ? CblasTrans : CblasNoTrans;
#ifdef CWM_SINGLE_PRECISION
  cblas_sgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
#else
  cblas_dgemm(CblasRowMajor, ta, tb, int(m), int(n), int(k), alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
#endif
}

}  // namespace cwm::blas
