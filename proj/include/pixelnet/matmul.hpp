#pragma once

#include <cstdint>

#include "pixelnet/parallel.hpp"

namespace pixelnet {

// Row-major GEMM kernels. Every dense forward/backward (linear layers and
// im2col convolution) maps onto these three shapes. The k-summation order is
// fixed per output element, so results do not depend on the thread count.

// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    parallel_for(M, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            T* c = C + i * N;
            if (!accumulate) {
                for (int j = 0; j < N; ++j) c[j] = T(0);
            }
            const T* a = A + i * K;
            for (int k = 0; k < K; ++k) {
                const T ak = a[k];
                const T* b = B + static_cast<std::int64_t>(k) * N;
                for (int j = 0; j < N; ++j) c[j] += ak * b[j];
            }
        }
    });
}

// C[M,N] (+)= A[M,K] * B^T, with B stored [N,K]. Lane accumulators keep the
// reduction vectorizable without -ffast-math while fixing the add order.
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    constexpr int kLanes = 16;
    parallel_for(M, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const T* a = A + i * K;
            T* c = C + i * N;
            for (int j = 0; j < N; ++j) {
                const T* b = B + static_cast<std::int64_t>(j) * K;
                T lanes[kLanes] = {};
                int k = 0;
                for (; k + kLanes <= K; k += kLanes) {
                    for (int l = 0; l < kLanes; ++l) lanes[l] += a[k + l] * b[k + l];
                }
                T sum = T(0);
                for (int l = 0; l < kLanes; ++l) sum += lanes[l];
                for (; k < K; ++k) sum += a[k] * b[k];
                if (accumulate) {
                    c[j] += sum;
                } else {
                    c[j] = sum;
                }
            }
        }
    });
}

// C[M,N] (+)= A^T * B, with A stored [K,M]. Used for weight gradients
// (dW = dY^T * X). Parallel over rows of C; each worker re-reads A and B but
// owns a disjoint slice of C.
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    parallel_for(M, [&](std::int64_t i0, std::int64_t i1) {
        if (!accumulate) {
            for (std::int64_t i = i0; i < i1; ++i) {
                T* c = C + i * N;
                for (int j = 0; j < N; ++j) c[j] = T(0);
            }
        }
        for (int k = 0; k < K; ++k) {
            const T* arow = A + static_cast<std::int64_t>(k) * M;
            const T* b = B + static_cast<std::int64_t>(k) * N;
            for (std::int64_t i = i0; i < i1; ++i) {
                const T aki = arow[i];
                if (aki == T(0)) continue;
                T* c = C + i * N;
                for (int j = 0; j < N; ++j) c[j] += aki * b[j];
            }
        }
    });
}

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) dst[static_cast<std::int64_t>(j) * rows + i] = src[static_cast<std::int64_t>(i) * cols + j];
    }
}

}  // namespace pixelnet
