#include "segdoctor/kernels/kernels.hpp"

// AVX2+FMA kernel variants. This TU is compiled with -mavx2 -mfma on x86-64;
// on other targets (or without the flags) every entry forwards to the scalar
// reference so the link surface stays identical.
//
// GEMM strategy: the nn and tn cases share one broadcast-A micro-kernel
// (6 rows x 2 vectors of columns, accumulating over k). A is read through
// explicit row/col strides, so the transposed case is just a stride swap.
// The nt case (dot-product shape, contiguous k in both operands) uses a
// 4-accumulator vectorized dot. Row and column tails fall back to scalar
// loops; results are equivalence-tested against kernels::ref with
// reassociation-aware tolerances.

namespace segdoctor::kernels::avx2 {

#if defined(__AVX2__) && defined(__FMA__)

bool compiled_with_avx2() { return true; }

}  // namespace segdoctor::kernels::avx2

#include <immintrin.h>

namespace segdoctor::kernels::avx2 {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// ---- float micro-kernel: R rows x 16 columns, A strided ----

template <int R>
inline void mk_f32_16(int K, const float* A, int ars, int acs, const float* B,
                      int ldb, float alpha, float beta, float* C, int ldc,
                      int m0, int n0) {
  __m256 acc[R][2];
  for (int r = 0; r < R; ++r) {
    acc[r][0] = _mm256_setzero_ps();
    acc[r][1] = _mm256_setzero_ps();
  }
  for (int k = 0; k < K; ++k) {
    const __m256 b0 = _mm256_loadu_ps(B + (size_t)k * ldb + n0);
    const __m256 b1 = _mm256_loadu_ps(B + (size_t)k * ldb + n0 + 8);
    for (int r = 0; r < R; ++r) {
      const __m256 a =
          _mm256_set1_ps(A[(size_t)(m0 + r) * ars + (size_t)k * acs]);
      acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
    }
  }
  const __m256 va = _mm256_set1_ps(alpha);
  for (int r = 0; r < R; ++r) {
    float* c = C + (size_t)(m0 + r) * ldc + n0;
    __m256 c0 = _mm256_mul_ps(va, acc[r][0]);
    __m256 c1 = _mm256_mul_ps(va, acc[r][1]);
    if (beta != 0.0f) {
      const __m256 vb = _mm256_set1_ps(beta);
      c0 = _mm256_fmadd_ps(vb, _mm256_loadu_ps(c), c0);
      c1 = _mm256_fmadd_ps(vb, _mm256_loadu_ps(c + 8), c1);
    }
    _mm256_storeu_ps(c, c0);
    _mm256_storeu_ps(c + 8, c1);
  }
}

// ---- double micro-kernel: R rows x 8 columns ----

template <int R>
inline void mk_f64_8(int K, const double* A, int ars, int acs, const double* B,
                     int ldb, double alpha, double beta, double* C, int ldc,
                     int m0, int n0) {
  __m256d acc[R][2];
  for (int r = 0; r < R; ++r) {
    acc[r][0] = _mm256_setzero_pd();
    acc[r][1] = _mm256_setzero_pd();
  }
  for (int k = 0; k < K; ++k) {
    const __m256d b0 = _mm256_loadu_pd(B + (size_t)k * ldb + n0);
    const __m256d b1 = _mm256_loadu_pd(B + (size_t)k * ldb + n0 + 4);
    for (int r = 0; r < R; ++r) {
      const __m256d a =
          _mm256_set1_pd(A[(size_t)(m0 + r) * ars + (size_t)k * acs]);
      acc[r][0] = _mm256_fmadd_pd(a, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(a, b1, acc[r][1]);
    }
  }
  const __m256d va = _mm256_set1_pd(alpha);
  for (int r = 0; r < R; ++r) {
    double* c = C + (size_t)(m0 + r) * ldc + n0;
    __m256d c0 = _mm256_mul_pd(va, acc[r][0]);
    __m256d c1 = _mm256_mul_pd(va, acc[r][1]);
    if (beta != 0.0) {
      const __m256d vb = _mm256_set1_pd(beta);
      c0 = _mm256_fmadd_pd(vb, _mm256_loadu_pd(c), c0);
      c1 = _mm256_fmadd_pd(vb, _mm256_loadu_pd(c + 4), c1);
    }
    _mm256_storeu_pd(c, c0);
    _mm256_storeu_pd(c + 4, c1);
  }
}

template <typename T>
inline void scalar_block(int m0, int m1, int n0, int n1, int K, T alpha,
                         const T* A, int ars, int acs, const T* B, int ldb,
                         T beta, T* C, int ldc) {
  for (int m = m0; m < m1; ++m)
    for (int n = n0; n < n1; ++n) {
      T acc = T(0);
      for (int k = 0; k < K; ++k)
        acc += A[(size_t)m * ars + (size_t)k * acs] * B[(size_t)k * ldb + n];
      T* c = &C[(size_t)m * ldc + n];
      *c = alpha * acc + (beta == T(0) ? T(0) : beta * *c);
    }
}

// Broadcast-A GEMM over strided A; handles nn (ars=lda, acs=1) and
// tn (ars=1, acs=lda).
inline void gemm_bcast(int M, int N, int K, float alpha, const float* A,
                       int ars, int acs, const float* B, int ldb, float beta,
                       float* C, int ldc) {
  constexpr int NR = 16;
  const int nmain = N - N % NR;
  int m = 0;
  for (; m + 6 <= M; m += 6)
    for (int n = 0; n < nmain; n += NR)
      mk_f32_16<6>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n);
  const int mrem = M - m;
  for (int n = 0; n < nmain; n += NR) {
    switch (mrem) {
      case 1: mk_f32_16<1>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 2: mk_f32_16<2>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 3: mk_f32_16<3>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 4: mk_f32_16<4>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 5: mk_f32_16<5>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      default: break;
    }
  }
  if (nmain < N) scalar_block(0, M, nmain, N, K, alpha, A, ars, acs, B, ldb, beta, C, ldc);
}

inline void gemm_bcast(int M, int N, int K, double alpha, const double* A,
                       int ars, int acs, const double* B, int ldb, double beta,
                       double* C, int ldc) {
  constexpr int NR = 8;
  const int nmain = N - N % NR;
  int m = 0;
  for (; m + 6 <= M; m += 6)
    for (int n = 0; n < nmain; n += NR)
      mk_f64_8<6>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n);
  const int mrem = M - m;
  for (int n = 0; n < nmain; n += NR) {
    switch (mrem) {
      case 1: mk_f64_8<1>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 2: mk_f64_8<2>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 3: mk_f64_8<3>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 4: mk_f64_8<4>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      case 5: mk_f64_8<5>(K, A, ars, acs, B, ldb, alpha, beta, C, ldc, m, n); break;
      default: break;
    }
  }
  if (nmain < N) scalar_block(0, M, nmain, N, K, alpha, A, ars, acs, B, ldb, beta, C, ldc);
}

inline float dot_impl(size_t n, const float* x, const float* y) {
  __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
  __m256 a2 = _mm256_setzero_ps(), a3 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    a0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), a0);
    a1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), a1);
    a2 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 16), _mm256_loadu_ps(y + i + 16), a2);
    a3 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 24), _mm256_loadu_ps(y + i + 24), a3);
  }
  for (; i + 8 <= n; i += 8)
    a0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), a0);
  float acc = hsum(_mm256_add_ps(_mm256_add_ps(a0, a1), _mm256_add_ps(a2, a3)));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

inline double dot_impl(size_t n, const double* x, const double* y) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), a2);
    a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), a3);
  }
  for (; i + 4 <= n; i += 4)
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  gemm_bcast(M, N, K, alpha, A, lda, 1, B, ldb, beta, C, ldc);
}

template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  gemm_bcast(M, N, K, alpha, A, 1, lda, B, ldb, beta, C, ldc);
}

template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      const T acc = dot_impl((size_t)K, A + (size_t)m * lda, B + (size_t)n * ldb);
      T* c = &C[(size_t)m * ldc + n];
      *c = alpha * acc + (beta == T(0) ? T(0) : beta * *c);
    }
}

inline void axpy_impl(size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

inline void axpy_impl(size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

inline void scale_shift_impl(size_t n, float a, float b, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a), vb = _mm256_set1_ps(b);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

inline void scale_shift_impl(size_t n, double a, double b, const double* x,
                         double* y) {
  const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vb));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

inline void relu_forward_impl(size_t n, const float* x, float* y) {
  const __m256 z = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

inline void relu_forward_impl(size_t n, const double* x, double* y) {
  const __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void relu_backward_impl(size_t n, const float* x, const float* dy,
                          float* dx) {
  const __m256 z = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

inline void relu_backward_impl(size_t n, const double* x, const double* dy,
                           double* dx) {
  const __m256d z = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), z, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

inline float sum_impl(size_t n, const float* x) {
  __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    a0 = _mm256_add_ps(a0, _mm256_loadu_ps(x + i));
    a1 = _mm256_add_ps(a1, _mm256_loadu_ps(x + i + 8));
  }
  for (; i + 8 <= n; i += 8) a0 = _mm256_add_ps(a0, _mm256_loadu_ps(x + i));
  float acc = hsum(_mm256_add_ps(a0, a1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

inline double sum_impl(size_t n, const double* x) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

inline float sumsq_centered_impl(size_t n, const float* x, float mean) {
  const __m256 vm = _mm256_set1_ps(mean);
  __m256 a0 = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(x + i), vm);
    a0 = _mm256_fmadd_ps(d, d, a0);
  }
  float acc = hsum(a0);
  for (; i < n; ++i) {
    const float d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

inline double sumsq_centered_impl(size_t n, const double* x, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d a0 = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    a0 = _mm256_fmadd_pd(d, d, a0);
  }
  double acc = hsum(a0);
  for (; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

template <typename T>
T dot(size_t n, const T* x, const T* y) {
  return dot_impl(n, x, y);
}

inline void sgd_step_impl(size_t n, float* p, const float* g, float* v, float lr,
                     float momentum, float wd) {
  const __m256 vmu = _mm256_set1_ps(momentum), vwd = _mm256_set1_ps(wd);
  const __m256 vlr = _mm256_set1_ps(lr);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vp = _mm256_loadu_ps(p + i);
    __m256 vv = _mm256_mul_ps(vmu, _mm256_loadu_ps(v + i));
    vv = _mm256_add_ps(vv, _mm256_fmadd_ps(vwd, vp, _mm256_loadu_ps(g + i)));
    _mm256_storeu_ps(v + i, vv);
    _mm256_storeu_ps(p + i, _mm256_fnmadd_ps(vlr, vv, vp));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + wd * p[i]);
    p[i] = p[i] - lr * v[i];
  }
}

inline void sgd_step_impl(size_t n, double* p, const double* g, double* v,
                      double lr, double momentum, double wd) {
  const __m256d vmu = _mm256_set1_pd(momentum), vwd = _mm256_set1_pd(wd);
  const __m256d vlr = _mm256_set1_pd(lr);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vp = _mm256_loadu_pd(p + i);
    __m256d vv = _mm256_mul_pd(vmu, _mm256_loadu_pd(v + i));
    vv = _mm256_add_pd(vv, _mm256_fmadd_pd(vwd, vp, _mm256_loadu_pd(g + i)));
    _mm256_storeu_pd(v + i, vv);
    _mm256_storeu_pd(p + i, _mm256_fnmadd_pd(vlr, vv, vp));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + wd * p[i]);
    p[i] = p[i] - lr * v[i];
  }
}

template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  axpy_impl(n, a, x, y);
}
template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y) {
  scale_shift_impl(n, a, b, x, y);
}
template <typename T>
void relu_forward(size_t n, const T* x, T* y) {
  relu_forward_impl(n, x, y);
}
template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx) {
  relu_backward_impl(n, x, dy, dx);
}
template <typename T>
T sum(size_t n, const T* x) {
  return sum_impl(n, x);
}
template <typename T>
T sumsq_centered(size_t n, const T* x, T mean) {
  return sumsq_centered_impl(n, x, mean);
}
template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd) {
  sgd_step_impl(n, p, g, v, lr, momentum, wd);
}

#define SEGDOCTOR_INSTANTIATE_AVX2(T)                                         \
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

SEGDOCTOR_INSTANTIATE_AVX2(float)
SEGDOCTOR_INSTANTIATE_AVX2(double)

#else  // !(__AVX2__ && __FMA__)

bool compiled_with_avx2() { return false; }

template <typename T>
void gemm_nn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  ref::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}
template <typename T>
void gemm_nt(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  ref::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}
template <typename T>
void gemm_tn(int M, int N, int K, T alpha, const T* A, int lda, const T* B,
             int ldb, T beta, T* C, int ldc) {
  ref::gemm_tn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}
template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  ref::axpy(n, a, x, y);
}
template <typename T>
void scale_shift(size_t n, T a, T b, const T* x, T* y) {
  ref::scale_shift(n, a, b, x, y);
}
template <typename T>
void relu_forward(size_t n, const T* x, T* y) {
  ref::relu_forward(n, x, y);
}
template <typename T>
void relu_backward(size_t n, const T* x, const T* dy, T* dx) {
  ref::relu_backward(n, x, dy, dx);
}
template <typename T>
T sum(size_t n, const T* x) {
  return ref::sum(n, x);
}
template <typename T>
T sumsq_centered(size_t n, const T* x, T mean) {
  return ref::sumsq_centered(n, x, mean);
}
template <typename T>
T dot(size_t n, const T* x, const T* y) {
  return ref::dot(n, x, y);
}
template <typename T>
void sgd_step(size_t n, T* p, const T* g, T* v, T lr, T momentum, T wd) {
  ref::sgd_step(n, p, g, v, lr, momentum, wd);
}

#define SEGDOCTOR_INSTANTIATE_AVX2(T)                                         \
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

SEGDOCTOR_INSTANTIATE_AVX2(float)
SEGDOCTOR_INSTANTIATE_AVX2(double)

#endif

}  // namespace segdoctor::kernels::avx2
