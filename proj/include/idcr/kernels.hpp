#pragma once

#include <cstddef>

// Dense kernels backing the tensor ops. Every kernel has a serial reference
// implementation and an OpenMP variant; the unsuffixed entry points dispatch
// at runtime. Parallel variants assign whole output rows to threads, so the
// per-element accumulation order is identical to the serial path and results
// are bit-for-bit equal.
namespace idcr::kernels {

struct ParallelConfig {
    bool enabled = true;
    // minimum m*k*n before a matmul is worth a parallel region
    long long matmul_threshold = 32LL * 32 * 32;
};

ParallelConfig& parallel_config();
void set_num_threads(int n); // <=0: library default

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] += a * b (same layout as the plain variants)
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt_acc(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

} // namespace idcr::kernels
