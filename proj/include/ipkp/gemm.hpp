#ifndef IPKP_GEMM_HPP
#define IPKP_GEMM_HPP

#include <cstddef>

namespace ipkp {

// Small row-major matrix kernels. Everything in the engine that is compute
// bound (convolution via im2col, dense layers and their backward passes) lands
// on one of these three. Loop orders are chosen so the inner loop runs over
// contiguous memory in both the source and destination row, which is enough
// for the compiler to vectorize.

// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<size_t>(i) * N;
        if (!accumulate) {
            for (int j = 0; j < N; ++j) c[j] = T(0);
        }
        const T* a = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            T aik = a[k];
            const T* b = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += aik * b[j];
        }
    }
}

// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[N,K]^T   (dot products of rows)
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<size_t>(i) * K;
        T* c = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<size_t>(j) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] = accumulate ? c[j] + acc : acc;
        }
    }
}

// C[M,N] = (accumulate ? C : 0) + A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) {
        for (size_t i = 0; i < static_cast<size_t>(M) * N; ++i) C[i] = T(0);
    }
    for (int k = 0; k < K; ++k) {
        const T* a = A + static_cast<size_t>(k) * M;
        const T* b = B + static_cast<size_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            T aki = a[i];
            T* c = C + static_cast<size_t>(i) * N;
            for (int j = 0; j < N; ++j) c[j] += aki * b[j];
        }
    }
}

// At[N,M] = A[M,N]^T. Worth a separate pass when a transposed operand would
// otherwise make gemm_tn sweep a large C once per k (the i-major kernels keep
// each C row hot in L1 instead).
template <typename T>
void transpose(int M, int N, const T* A, T* At) {
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) At[static_cast<size_t>(j) * M + i] = a[j];
    }
}

}  // namespace ipkp

#endif
