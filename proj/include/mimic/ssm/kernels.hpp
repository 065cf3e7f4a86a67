#pragma once

#include <cmath>
#include <cstddef>

// Dense kernels for the sequence model. Everything is row-major and
// accumulating (callers zero the output when they need C = A*B). Weight
// matrices are stored [in][out] so forward passes run as broadcast-FMA
// over the output dimension, which vectorizes cleanly.

namespace mimic::ssm {

// C[M][N] += A[M][K] * B[K][N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[M][N] += A[M][K] * B[N][K]^T  (B stored row-major [N][K])
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// C[M][N] -= A[M][K] * B[N][K]^T
template <typename T>
void gemm_nt_sub(std::size_t m, std::size_t n, std::size_t k,
                 const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* bj = b + j * k;
            T acc = T(0);
#pragma omp simd reduction(+ : acc)
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] -= acc;
        }
    }
}

// C[M][N] -= A[M][K] * B[K][N]
template <typename T>
void gemm_nn_sub(std::size_t m, std::size_t n, std::size_t k,
                 const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = a + i * k;
        T* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = ai[p];
            const T* bp = b + p * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) ci[j] -= av * bp[j];
        }
    }
}

// C[K][N] += A[M][K]^T * B[M][N]  (weight-gradient shape: K=in, N=out, M=time)
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const T* a, const T* b, T* c) {
    for (std::size_t t = 0; t < m; ++t) {
        const T* at = a + t * k;
        const T* bt = b + t * n;
        for (std::size_t i = 0; i < k; ++i) {
            const T av = at[i];
            T* ci = c + i * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

// C[K][N] -= A[M][K]^T * B[M][N]
template <typename T>
void gemm_tn_sub(std::size_t m, std::size_t n, std::size_t k,
                 const T* a, const T* b, T* c) {
    for (std::size_t t = 0; t < m; ++t) {
        const T* at = a + t * k;
        const T* bt = b + t * n;
        for (std::size_t i = 0; i < k; ++i) {
            const T av = at[i];
            T* ci = c + i * n;
#pragma omp simd
            for (std::size_t j = 0; j < n; ++j) ci[j] -= av * bt[j];
        }
    }
}

// Exact GELU and its derivative (erf form, no tanh approximation).
template <typename T>
inline T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475)));
}

template <typename T>
inline T gelu_grad(T x) {
    const T phi = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475)));
    const T pdf = T(0.3989422804014327) * std::exp(T(-0.5) * x * x);
    return phi + x * pdf;
}

template <typename T>
inline T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                     : std::exp(x) / (T(1) + std::exp(x));
}

} // namespace mimic::ssm
