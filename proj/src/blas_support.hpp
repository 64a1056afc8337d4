// row-major GEMM shim over OpenBLAS, pinned to one thread
#ifndef EDENVFI_BLAS_SUPPORT_HPP
#define EDENVFI_BLAS_SUPPORT_HPP

#include <cblas-openblas.h>

#include <mutex>

namespace edenvfi::ops {

inline void blas_single_thread() {
    static std::once_flag flag;
    std::call_once(flag, [] { openblas_set_num_threads(1); });
}

// C[m,n] (+)= alpha * op(A) * op(B); lda/ldb/ldc are physical row strides,
// which lets callers write a strip directly into a larger destination
inline void gemm_rm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                    int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    blas_single_thread();
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void gemm_rm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                    int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    blas_single_thread();
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

} // namespace edenvfi::ops

#endif
