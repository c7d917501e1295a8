#pragma once

#include <cstddef>
#include <string>

// Arithmetic inner loops used by the layers and losses. Every kernel has a
// scalar reference implementation (kernels::ref) and, on x86-64, an AVX2+FMA
// variant (kernels::avx2) compiled in a separate translation unit. The
// top-level functions dispatch at runtime: AVX2 when the CPU supports it,
// scalar otherwise. SEGDOCTOR_KERNELS=scalar|avx2 overrides the choice.
//
// GEMM conventions (row-major, leading dimension = elements between rows):
//   gemm_nn: C[MxN] = alpha * A[MxK] * B[KxN] + beta * C
//   gemm_nt: C[MxN] = alpha * A[MxK] * B[NxK]^T + beta * C
//   gemm_tn: C[MxN] = alpha * A[KxM]^T * B[KxN] + beta * C

namespace segdoctor::kernels {

enum class Backend { kScalar, kAvx2 };

Backend active_backend();
void set_backend(Backend b);          // test hook
const char* backend_name(Backend b);
bool avx2_available();                // compiled in and supported by the CPU

namespace ref {

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);

template <typename T>
void axpy(size_t n, T a, const T* x, T* y);                // y += a*x
template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y);    // y = a*x + b
template <typename T>
void relu_forward(size_t n, const T* x, T* y);
template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx);
template <typename T>
T sum(size_t n, const T* x);
template <typename T>
T sumsq_centered(size_t n, const T* x, T mean);            // sum((x-mean)^2)
template <typename T>
T dot(size_t n, const T* x, const T* y);
// v = momentum*v + g + wd*p; p -= lr*v
template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd);

}  // namespace ref

namespace avx2 {

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);

template <typename T>
void axpy(size_t n, T a, const T* x, T* y);
template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y);
template <typename T>
void relu_forward(size_t n, const T* x, T* y);
template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx);
template <typename T>
T sum(size_t n, const T* x);
template <typename T>
T sumsq_centered(size_t n, const T* x, T mean);
template <typename T>
T dot(size_t n, const T* x, const T* y);
template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd);

}  // namespace avx2

// Dispatched entry points.
template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc);
template <typename T>
void axpy(size_t n, T a, const T* x, T* y);
template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y);
template <typename T>
void relu_forward(size_t n, const T* x, T* y);
template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx);
template <typename T>
T sum(size_t n, const T* x);
template <typename T>
T sumsq_centered(size_t n, const T* x, T mean);
template <typename T>
T dot(size_t n, const T* x, const T* y);
template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd);

}  // namespace segdoctor::kernels
