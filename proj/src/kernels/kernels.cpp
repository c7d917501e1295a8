#include "segdoctor/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace segdoctor::kernels {

namespace avx2 {
bool compiled_with_avx2();
}

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return avx2::compiled_with_avx2() && __builtin_cpu_supports("avx2") &&
         __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend pick_backend() {
  if (const char* env = std::getenv("SEGDOCTOR_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::kAvx2;
    if (std::strcmp(env, "avx2") == 0) return Backend::kScalar;  // unsupported
  }
  return avx2_available() ? Backend::kAvx2 : Backend::kScalar;
}

Backend g_backend = pick_backend();

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  g_backend = (b == Backend::kAvx2 && !avx2_available()) ? Backend::kScalar : b;
}

const char* backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  if (g_backend == Backend::kAvx2)
    avx2::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  else
    ref::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}

template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  if (g_backend == Backend::kAvx2)
    avx2::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  else
    ref::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}

template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  if (g_backend == Backend::kAvx2)
    avx2::gemm_tn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
  else
    ref::gemm_tn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}

template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  if (g_backend == Backend::kAvx2)
    avx2::axpy(n, a, x, y);
  else
    ref::axpy(n, a, x, y);
}

template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y) {
  if (g_backend == Backend::kAvx2)
    avx2::scale_shift(n, a, b, x, y);
  else
    ref::scale_shift(n, a, b, x, y);
}

template <typename T>
void relu_forward(size_t n, const T* x, T* y) {
  if (g_backend == Backend::kAvx2)
    avx2::relu_forward(n, x, y);
  else
    ref::relu_forward(n, x, y);
}

template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx) {
  if (g_backend == Backend::kAvx2)
    avx2::relu_backward(n, x, dy, dx);
  else
    ref::relu_backward(n, x, dy, dx);
}

template <typename T>
T sum(size_t n, const T* x) {
  return g_backend == Backend::kAvx2 ? avx2::sum(n, x) : ref::sum(n, x);
}

template <typename T>
T sumsq_centered(size_t n, const T* x, T mean) {
  return g_backend == Backend::kAvx2 ? avx2::sumsq_centered(n, x, mean)
                                     : ref::sumsq_centered(n, x, mean);
}

template <typename T>
T dot(size_t n, const T* x, const T* y) {
  return g_backend == Backend::kAvx2 ? avx2::dot(n, x, y) : ref::dot(n, x, y);
}

template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd) {
  if (g_backend == Backend::kAvx2)
    avx2::sgd_step(n, p, g, v, lr, momentum, wd);
  else
    ref::sgd_step(n, p, g, v, lr, momentum, wd);
}

#define SEGDOCTOR_INSTANTIATE_DISPATCH(T)                                     \
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

SEGDOCTOR_INSTANTIATE_DISPATCH(float)
SEGDOCTOR_INSTANTIATE_DISPATCH(double)

}  // namespace segdoctor::kernels
