#include "segdoctor/kernels/kernels.hpp"

// Scalar reference kernels. Kept as plain loops: these are the baseline the
// SIMD variants are equivalence-tested against, and the fallback on CPUs
// without AVX2.

namespace segdoctor::kernels::ref {

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += A[m * lda + k] * B[k * ldb + n];
      T* c = &C[m * ldc + n];
      *c = alpha * acc + (beta == T(0) ? T(0) : beta * *c);
    }
  }
}

template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += A[m * lda + k] * B[n * ldb + k];
      T* c = &C[m * ldc + n];
      *c = alpha * acc + (beta == T(0) ? T(0) : beta * *c);
    }
  }
}

template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      T acc = T(0);
      for (int k = 0; k < K; ++k) acc += A[k * lda + m] * B[k * ldb + n];
      T* c = &C[m * ldc + n];
      *c = alpha * acc + (beta == T(0) ? T(0) : beta * *c);
    }
  }
}

template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

template <typename T>
void relu_forward(size_t n, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
}

template <typename T>
T sum(size_t n, const T* x) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sumsq_centered(size_t n, const T* x, T mean) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) {
    const T d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

template <typename T>
T dot(size_t n, const T* x, const T* y) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd) {
  for (size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i] + wd * p[i];
    p[i] -= lr * v[i];
  }
}

#define SEGDOCTOR_INSTANTIATE_REF(T)                                          \
  template void gemm_nn<T>(int, int, int, T, const T*, int, const T*, int, T, \
                           T*, int);                                          \
  template void gemm_nt<T>(int, int, int, T, const T*, int, const T*, int, T, \
                           T*, int);                                          \
  template void gemm_tn<T>(int, int, int, T, const T*, int, const T*, int, T, \
                           T*, int);                                          \
  template void axpy<T>(size_t, T, const T*, T*);                             \
  template void scale_shift<T>(size_t, T, T, const T*, T*);                   \
  template void relu_forward<T>(size_t, const T*, T*);                        \
  template void relu_backward<T>(size_t, const T*, const T*, T*);             \
  template T sum<T>(size_t, const T*);                                        \
  template T sumsq_centered<T>(size_t, const T*, T);                          \
  template T dot<T>(size_t, const T*, const T*);                              \
  template void sgd_step<T>(size_t, T*, const T*, T*, T, T, T);

SEGDOCTOR_INSTANTIATE_REF(float)
SEGDOCTOR_INSTANTIATE_REF(double)

}  // namespace segdoctor::kernels::ref
