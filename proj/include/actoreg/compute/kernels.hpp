#pragma once

#include <cstddef>
#include <cstdint>

namespace actoreg::compute {

enum class Backend { serial, openmp };

// Global kernel backend. Defaults to openmp when compiled with OpenMP.
// Both backends are bit-deterministic for a fixed input; elementwise and
// matmul kernels are bit-identical across backends, reductions agree to
// double-precision rounding.
Backend backend();
void set_backend(Backend b);

// Thread cap for the openmp backend. Thread count never affects results:
// reductions use fixed block boundaries combined in a fixed order.
int max_threads();
void set_max_threads(int n);

namespace kernels {

// C[m x n] = A[m x k] * B[k x n]; accumulate adds into C instead.
void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
// C[m x n] = A[k x m]^T * B[k x n]
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);

// Blocked double-accumulation reductions (deterministic for any thread count).
double reduce_sum(const float* x, size_t n);
double reduce_sum_sq_dev(const float* x, size_t n, double mu);

// y[i] = f(x[i]) for the pointwise table below.
enum class Unary { relu, tanh_, exp_, log_, sqrt_, abs_, neg, square };
void unary(Unary op, const float* x, float* y, size_t n);

// Generic parallel loop used by tensor ops and RNG fills. body must be a
// pure function of its index.
void parallel_for(size_t n, const auto& body);

namespace detail {
bool use_openmp(size_t n);
}

}  // namespace kernels

namespace kernels {

inline void parallel_for(size_t n, const auto& body) {
    if (detail::use_openmp(n)) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) body(static_cast<size_t>(i));
    } else {
        for (size_t i = 0; i < n; ++i) body(i);
    }
}

}  // namespace kernels

namespace serial_kernels {
// Reference implementations: plain loops, double accumulators for reductions.
void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
double reduce_sum(const float* x, size_t n);
double reduce_sum_sq_dev(const float* x, size_t n, double mu);
void unary(kernels::Unary op, const float* x, float* y, size_t n);
}  // namespace serial_kernels

namespace omp_kernels {
void matmul_nn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n, bool accumulate);
double reduce_sum(const float* x, size_t n);
double reduce_sum_sq_dev(const float* x, size_t n, double mu);
void unary(kernels::Unary op, const float* x, float* y, size_t n);
}  // namespace omp_kernels

}  // namespace actoreg::compute
