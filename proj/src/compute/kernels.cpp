#include "actoreg/compute/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace actoreg::compute {

namespace {

#ifdef _OPENMP
std::atomic<Backend> g_backend{Backend::openmp};
#else
std::atomic<Backend> g_backend{Backend::serial};
#endif
std::atomic<int> g_max_threads{0};  // 0 = OpenMP default

// Reduction block size. Fixed so the partial-sum tree is independent of the
// thread count.
constexpr size_t kBlock = 4096;

inline float apply_unary(kernels::Unary op, float v) {
    switch (op) {
        case kernels::Unary::relu: return v > 0.0f ? v : 0.0f;
        case kernels::Unary::tanh_: return std::tanh(v);
        case kernels::Unary::exp_: return std::exp(v);
        case kernels::Unary::log_: return std::log(v);
        case kernels::Unary::sqrt_: return std::sqrt(v);
        case kernels::Unary::abs_: return std::fabs(v);
        case kernels::Unary::neg: return -v;
        case kernels::Unary::square: return v * v;
    }
    return v;
}

// One output row of C = A * B in saxpy form; shared by both backends so the
// per-row arithmetic is bit-identical.
inline void matmul_nn_row(const float* a, const float* b, float* c, int k, int n, int i,
                          bool accumulate) {
    float* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) std::memset(crow, 0, sizeof(float) * n);
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
        const float av = arow[p];
        const float* brow = b + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

inline void matmul_nt_row(const float* a, const float* b, float* c, int k, int n, int i,
                          bool accumulate) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const float* brow = b + static_cast<size_t>(j) * k;
        float acc = 0.0f;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] = accumulate ? crow[j] + acc : acc;
    }
}

inline double block_sum(const float* x, size_t lo, size_t hi) {
    double acc = 0.0;
    for (size_t i = lo; i < hi; ++i) acc += static_cast<double>(x[i]);
    return acc;
}

inline double block_sum_sq_dev(const float* x, size_t lo, size_t hi, double mu) {
    double acc = 0.0;
    for (size_t i = lo; i < hi; ++i) {
        const double d = static_cast<double>(x[i]) - mu;
        acc += d * d;
    }
    return acc;
}

// Serial combination of fixed-size block partials. Both backends reduce with
// exactly this association, so results are bit-identical for any thread count.
template <class BlockFn>
inline double blocked_reduce_serial(size_t n, const BlockFn& block) {
    const size_t nblocks = (n + kBlock - 1) / kBlock;
    double acc = 0.0;
    for (size_t b = 0; b < nblocks; ++b) {
        const size_t lo = b * kBlock;
        acc += block(lo, std::min(lo + kBlock, n));
    }
    return acc;
}

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
#ifndef _OPENMP
    b = Backend::serial;
#endif
    g_backend.store(b, std::memory_order_relaxed);
}

int max_threads() { return g_max_threads.load(std::memory_order_relaxed); }

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

namespace kernels::detail {

bool use_openmp(size_t n) {
#ifdef _OPENMP
    return backend() == Backend::openmp && n >= 256 && max_threads() != 1 &&
           omp_get_max_threads() > 1 && !omp_in_parallel();
#else
    (void)n;
    return false;
#endif
}

}  // namespace kernels::detail

// --- serial reference ---

namespace serial_kernels {

void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_nn_row(a, b, c, k, n, i, accumulate);
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, i, accumulate);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * n);
        for (int p = 0; p < k; ++p) {
            const float av = a[static_cast<size_t>(p) * m + i];
            const float* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double reduce_sum(const float* x, size_t n) {
    return blocked_reduce_serial(n, [x](size_t lo, size_t hi) { return block_sum(x, lo, hi); });
}

double reduce_sum_sq_dev(const float* x, size_t n, double mu) {
    return blocked_reduce_serial(
        n, [x, mu](size_t lo, size_t hi) { return block_sum_sq_dev(x, lo, hi, mu); });
}

void unary(kernels::Unary op, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = apply_unary(op, x[i]);
}

}  // namespace serial_kernels

// --- OpenMP variants ---

namespace omp_kernels {

void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nn_row(a, b, c, k, n, i, accumulate);
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, i, accumulate);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * n);
        for (int p = 0; p < k; ++p) {
            const float av = a[static_cast<size_t>(p) * m + i];
            const float* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

double reduce_sum(const float* x, size_t n) {
    const size_t nblocks = (n + kBlock - 1) / kBlock;
    if (nblocks <= 1) return block_sum(x, 0, n);
    std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < static_cast<int64_t>(nblocks); ++b) {
        const size_t lo = static_cast<size_t>(b) * kBlock;
        partial[static_cast<size_t>(b)] = block_sum(x, lo, std::min(lo + kBlock, n));
    }
    double acc = 0.0;
    for (double p : partial) acc += p;
    return acc;
}

double reduce_sum_sq_dev(const float* x, size_t n, double mu) {
    const size_t nblocks = (n + kBlock - 1) / kBlock;
    if (nblocks <= 1) return block_sum_sq_dev(x, 0, n, mu);
    std::vector<double> partial(nblocks);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < static_cast<int64_t>(nblocks); ++b) {
        const size_t lo = static_cast<size_t>(b) * kBlock;
        partial[static_cast<size_t>(b)] = block_sum_sq_dev(x, lo, std::min(lo + kBlock, n), mu);
    }
    double acc = 0.0;
    for (double p : partial) acc += p;
    return acc;
}

void unary(kernels::Unary op, const float* x, float* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i)
        y[static_cast<size_t>(i)] = apply_unary(op, x[static_cast<size_t>(i)]);
}

}  // namespace omp_kernels

// --- dispatch ---

namespace kernels {

namespace {
inline bool omp_path(size_t work) { return detail::use_openmp(work); }
}  // namespace

void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    if (omp_path(static_cast<size_t>(m) * k * n))
        omp_kernels::matmul_nn(a, b, c, m, k, n, accumulate);
    else
        serial_kernels::matmul_nn(a, b, c, m, k, n, accumulate);
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    if (omp_path(static_cast<size_t>(m) * k * n))
        omp_kernels::matmul_nt(a, b, c, m, k, n, accumulate);
    else
        serial_kernels::matmul_nt(a, b, c, m, k, n, accumulate);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate) {
    if (omp_path(static_cast<size_t>(m) * k * n))
        omp_kernels::matmul_tn(a, b, c, m, k, n, accumulate);
    else
        serial_kernels::matmul_tn(a, b, c, m, k, n, accumulate);
}

double reduce_sum(const float* x, size_t n) {
    return omp_path(n) ? omp_kernels::reduce_sum(x, n) : serial_kernels::reduce_sum(x, n);
}

double reduce_sum_sq_dev(const float* x, size_t n, double mu) {
    return omp_path(n) ? omp_kernels::reduce_sum_sq_dev(x, n, mu)
                       : serial_kernels::reduce_sum_sq_dev(x, n, mu);
}

void unary(Unary op, const float* x, float* y, size_t n) {
    if (omp_path(n))
        omp_kernels::unary(op, x, y, n);
    else
        serial_kernels::unary(op, x, y, n);
}

}  // namespace kernels

}  // namespace actoreg::compute
