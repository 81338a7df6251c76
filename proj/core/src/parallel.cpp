#include "faac/parallel.hpp"

#include <algorithm>

#include <cblas.h>
#include <omp.h>

extern "C" void openblas_set_num_threads(int);

namespace faac {

namespace {
int g_workers = 1;
}

void init_parallelism(int num_threads) {
    if (num_threads <= 0) num_threads = omp_get_max_threads();
    g_workers = std::max(1, num_threads);
    omp_set_num_threads(g_workers);
    // outer-level omp owns the cores; a threaded BLAS underneath would
    // oversubscribe and break run-to-run determinism
    openblas_set_num_threads(1);
}

int worker_count() { return g_workers; }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
    const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
    const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;

    const bool split = !omp_in_parallel() && g_workers > 1 && n >= 256 &&
                       int64_t(m) * n * k >= (1 << 20);
    if (!split) {
        cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
        return;
    }

#pragma omp parallel num_threads(g_workers)
    {
        const int nth = omp_get_num_threads();
        const int tid = omp_get_thread_num();
        const int chunk = (n + nth - 1) / nth;
        const int col0 = tid * chunk;
        const int cols = std::min(chunk, n - col0);
        if (cols > 0) {
            // B column block starts at col0 (or row col0 when transposed)
            const float* b_blk = trans_b ? b + int64_t(col0) * ldb : b + col0;
            cblas_sgemm(CblasRowMajor, ta, tb, m, cols, k, alpha, a, lda, b_blk, ldb,
                        beta, c + col0, ldc);
        }
    }
}

}  // namespace faac
