#pragma once

#include <cstdint>

namespace faac {

// Pins BLAS to a single thread and records the worker count for omp loops.
// All parallelism in this codebase happens at the outer level (clips, batch
// shards, pixel rows) with ordered reductions, so results do not depend on
// the number of workers. Call once at process start.
void init_parallelism(int num_threads = 0);

int worker_count();

// C[M,N] += / = A[M,K] * B[K,N], row-major. If `accumulate` is false C is
// overwritten. Splits columns across workers when called outside a parallel
// region; each output element is still produced by exactly one sgemm call,
// so values do not depend on the split.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);

}  // namespace faac
