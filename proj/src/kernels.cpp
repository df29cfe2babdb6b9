#include "idcr/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace idcr::kernels {

ParallelConfig& parallel_config() {
    static ParallelConfig cfg;
    return cfg;
}

void set_num_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Row i of c depends only on row i of a, so both variants compute each output
// row with the same ikj accumulation order.
static inline void matmul_row(const double* a, const double* b, double* c, int i, int k,
                              int n) {
    double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
    std::memset(ci, 0, sizeof(double) * static_cast<size_t>(n));
    const double* ai = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int p = 0; p < k; ++p) {
        const double av = ai[p];
        const double* bp = b + static_cast<std::ptrdiff_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
    const auto& cfg = parallel_config();
    if (cfg.enabled && static_cast<long long>(m) * k * n >= cfg.matmul_threshold)
        matmul_omp(a, b, c, m, k, n);
    else
        matmul_serial(a, b, c, m, k, n);
}

static inline void matmul_nt_row(const double* a, const double* b, double* c, int i, int k,
                                 int n) {
    const double* ai = a + static_cast<std::ptrdiff_t>(i) * k;
    double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<std::ptrdiff_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] = acc;
    }
}

void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    const auto& cfg = parallel_config();
    if (cfg.enabled && static_cast<long long>(m) * k * n >= cfg.matmul_threshold)
        matmul_nt_omp(a, b, c, m, k, n);
    else
        matmul_nt_serial(a, b, c, m, k, n);
}

// a is k x m, walked column-wise; each output row still belongs to one thread.
static inline void matmul_tn_row(const double* a, const double* b, double* c, int i, int k,
                                 int m, int n) {
    (void)m;
    double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
    std::memset(ci, 0, sizeof(double) * static_cast<size_t>(n));
    for (int p = 0; p < k; ++p) {
        const double av = a[static_cast<std::ptrdiff_t>(p) * m + i];
        const double* bp = b + static_cast<std::ptrdiff_t>(p) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
}

void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, i, k, m, n);
}

void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, i, k, m, n);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    const auto& cfg = parallel_config();
    if (cfg.enabled && static_cast<long long>(m) * k * n >= cfg.matmul_threshold)
        matmul_tn_omp(a, b, c, m, k, n);
    else
        matmul_tn_serial(a, b, c, m, k, n);
}

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::ptrdiff_t>(i) * k;
        double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<std::ptrdiff_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_nt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::ptrdiff_t>(i) * k;
        double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::ptrdiff_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<std::ptrdiff_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[static_cast<std::ptrdiff_t>(p) * m + i];
            const double* bp = b + static_cast<std::ptrdiff_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

} // namespace idcr::kernels
