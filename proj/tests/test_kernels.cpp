#include <cmath>
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "segdoctor/core/random.hpp"
#include "segdoctor/kernels/kernels.hpp"
#include "testutil.hpp"

using segdoctor::Rng;
using testutil::close;
namespace k = segdoctor::kernels;

namespace {

enum class Layout { NN, NT, TN };

// Independent strided triple-loop oracle, always accumulating in double.
template <typename T>
std::vector<double> naive_gemm(Layout lay, int M, int N, int K, T alpha,
                               const std::vector<T>& A, int lda,
                               const std::vector<T>& B, int ldb, T beta,
                               const std::vector<T>& C0, int ldc) {
  std::vector<double> out(C0.size());
  for (size_t i = 0; i < C0.size(); ++i) out[i] = static_cast<double>(C0[i]);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double acc = 0;
      for (int p = 0; p < K; ++p) {
        double a, b;
        switch (lay) {
          case Layout::NN:
            a = A[static_cast<size_t>(i) * lda + p];
            b = B[static_cast<size_t>(p) * ldb + j];
            break;
          case Layout::NT:
            a = A[static_cast<size_t>(i) * lda + p];
            b = B[static_cast<size_t>(j) * ldb + p];
            break;
          case Layout::TN:
            a = A[static_cast<size_t>(p) * lda + i];
            b = B[static_cast<size_t>(p) * ldb + j];
            break;
        }
        acc += a * b;
      }
      const size_t ci = static_cast<size_t>(i) * ldc + j;
      out[ci] = static_cast<double>(alpha) * acc +
                (beta == T(0) ? 0.0 : static_cast<double>(beta) * out[ci]);
    }
  return out;
}

template <typename T>
void run_gemm(bool use_avx2, Layout lay, int M, int N, int K, T alpha,
              const T* A, int lda, const T* B, int ldb, T beta, T* C, int ldc) {
  if (use_avx2) {
    switch (lay) {
      case Layout::NN: k::avx2::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
      case Layout::NT: k::avx2::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
      case Layout::TN: k::avx2::gemm_tn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
    }
  } else {
    switch (lay) {
      case Layout::NN: k::ref::gemm_nn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
      case Layout::NT: k::ref::gemm_nt(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
      case Layout::TN: k::ref::gemm_tn(M, N, K, alpha, A, lda, B, ldb, beta, C, ldc); break;
    }
  }
}

template <typename T>
void fill(std::vector<T>& v, Rng& rng) {
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
}

// Randomized sweep of one layout/type against the naive oracle (ref path)
// and ref-vs-avx2 equivalence. Sizes deliberately hit the 6-row / 16- and
// 8-column micro-kernel remainders and padded leading dimensions.
template <typename T>
void gemm_sweep(Layout lay, double oracle_rel, double oracle_abs,
                double equiv_rel, double equiv_abs, uint64_t seed) {
  Rng rng(seed);
  for (int trial = 0; trial < 60; ++trial) {
    const int M = 1 + static_cast<int>(rng.uniform_int(19));
    const int N = 1 + static_cast<int>(rng.uniform_int(37));
    const int K = 1 + static_cast<int>(rng.uniform_int(48));
    const int pa = static_cast<int>(rng.uniform_int(4));
    const int pb = static_cast<int>(rng.uniform_int(4));
    const int pc = static_cast<int>(rng.uniform_int(4));
    const int lda = (lay == Layout::TN ? M : K) + pa;
    const int ldb = (lay == Layout::NT ? K : N) + pb;
    const int ldc = N + pc;
    const int arows = (lay == Layout::TN ? K : M);
    const int brows = (lay == Layout::NT ? N : K);

    std::vector<T> A(static_cast<size_t>(arows) * lda);
    std::vector<T> B(static_cast<size_t>(brows) * ldb);
    std::vector<T> C0(static_cast<size_t>(M) * ldc);
    fill(A, rng);
    fill(B, rng);
    fill(C0, rng);
    const T alpha = static_cast<T>(rng.uniform(-2.0, 2.0));
    const T beta = trial % 3 == 0 ? T(0) : static_cast<T>(rng.uniform(-1.0, 1.0));

    auto expect = naive_gemm(lay, M, N, K, alpha, A, lda, B, ldb, beta, C0, ldc);

    std::vector<T> Cr = C0;
    run_gemm<T>(false, lay, M, N, K, alpha, A.data(), lda, B.data(), ldb, beta,
                Cr.data(), ldc);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) {
        const size_t ci = static_cast<size_t>(i) * ldc + j;
        REQUIRE(close(static_cast<double>(Cr[ci]), expect[ci], oracle_rel, oracle_abs));
      }

    if (k::avx2_available()) {
      std::vector<T> Cv = C0;
      run_gemm<T>(true, lay, M, N, K, alpha, A.data(), lda, B.data(), ldb, beta,
                  Cv.data(), ldc);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
          const size_t ci = static_cast<size_t>(i) * ldc + j;
          REQUIRE(close(static_cast<double>(Cv[ci]), static_cast<double>(Cr[ci]),
                        equiv_rel, equiv_abs));
        }
      // padding bytes must stay untouched
      for (int i = 0; i < M; ++i)
        for (int j = N; j < ldc; ++j) {
          const size_t ci = static_cast<size_t>(i) * ldc + j;
          REQUIRE(Cv[ci] == C0[ci]);
        }
    }
  }
}

}  // namespace

TEST_CASE("gemm hand case: 2x2 with alpha and beta") {
  // A*B with A=[[1,2],[3,4]], B=[[5,6],[7,8]] is [[19,22],[43,50]];
  // alpha=2, beta=3 over C0=ones gives [[41,47],[89,103]].
  const std::vector<double> A{1, 2, 3, 4};
  const std::vector<double> B{5, 6, 7, 8};
  const std::vector<double> Bt{5, 7, 6, 8};
  const std::vector<double> At{1, 3, 2, 4};
  const std::vector<double> expect{41, 47, 89, 103};

  std::vector<double> C(4, 1.0);
  k::ref::gemm_nn(2, 2, 2, 2.0, A.data(), 2, B.data(), 2, 3.0, C.data(), 2);
  for (int i = 0; i < 4; ++i) CHECK(C[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  C.assign(4, 1.0);
  k::ref::gemm_nt(2, 2, 2, 2.0, A.data(), 2, Bt.data(), 2, 3.0, C.data(), 2);
  for (int i = 0; i < 4; ++i) CHECK(C[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  C.assign(4, 1.0);
  k::ref::gemm_tn(2, 2, 2, 2.0, At.data(), 2, B.data(), 2, 3.0, C.data(), 2);
  for (int i = 0; i < 4; ++i) CHECK(C[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("gemm beta=0 overwrites even NaN-poisoned output") {
  const std::vector<float> A{1, 2};
  const std::vector<float> B{3, 4};
  std::vector<float> C(1, std::numeric_limits<float>::quiet_NaN());
  k::ref::gemm_nn(1, 1, 2, 1.0f, A.data(), 2, B.data(), 1, 0.0f, C.data(), 1);
  CHECK(C[0] == 11.0f);
  if (k::avx2_available()) {
    C[0] = std::numeric_limits<float>::quiet_NaN();
    k::avx2::gemm_nn(1, 1, 2, 1.0f, A.data(), 2, B.data(), 1, 0.0f, C.data(), 1);
    CHECK(C[0] == 11.0f);
  }
}

TEST_CASE("gemm nn randomized: oracle + simd equivalence") {
  gemm_sweep<float>(Layout::NN, 5e-4, 1e-4, 2e-4, 1e-5, 1001);
  gemm_sweep<double>(Layout::NN, 1e-12, 1e-12, 1e-11, 1e-13, 1002);
}

TEST_CASE("gemm nt randomized: oracle + simd equivalence") {
  gemm_sweep<float>(Layout::NT, 5e-4, 1e-4, 2e-4, 1e-5, 2001);
  gemm_sweep<double>(Layout::NT, 1e-12, 1e-12, 1e-11, 1e-13, 2002);
}

TEST_CASE("gemm tn randomized: oracle + simd equivalence") {
  gemm_sweep<float>(Layout::TN, 5e-4, 1e-4, 2e-4, 1e-5, 3001);
  gemm_sweep<double>(Layout::TN, 1e-12, 1e-12, 1e-11, 1e-13, 3002);
}

TEST_CASE("gemm conv-shaped case stays accurate") {
  // One realistically shaped call (64 filters over 576-dim patches).
  Rng rng(4242);
  const int M = 64, N = 100, K = 576;
  std::vector<float> A(static_cast<size_t>(M) * K), B(static_cast<size_t>(K) * N),
      C(static_cast<size_t>(M) * N, 0.0f);
  fill(A, rng);
  fill(B, rng);
  auto expect = naive_gemm(Layout::NN, M, N, K, 1.0f, A, K, B, N, 0.0f, C, N);
  k::gemm_nn(M, N, K, 1.0f, A.data(), K, B.data(), N, 0.0f, C.data(), N);
  for (size_t i = 0; i < C.size(); ++i)
    REQUIRE(close(C[i], expect[i], 1e-3, 1e-3));
}

template <typename T>
static void elementwise_equivalence(uint64_t seed, double rel, double abs_tol) {
  if (!k::avx2_available()) return;
  Rng rng(seed);
  for (size_t n : {size_t(1), size_t(3), size_t(7), size_t(8), size_t(15),
                   size_t(16), size_t(17), size_t(100), size_t(1023)}) {
    std::vector<T> x(n), y0(n), dy(n), g(n);
    fill(x, rng);
    fill(y0, rng);
    fill(dy, rng);
    fill(g, rng);
    const T a = static_cast<T>(rng.uniform(-2.0, 2.0));
    const T b = static_cast<T>(rng.uniform(-2.0, 2.0));

    std::vector<T> yr = y0, yv = y0;
    k::ref::axpy(n, a, x.data(), yr.data());
    k::avx2::axpy(n, a, x.data(), yv.data());
    for (size_t i = 0; i < n; ++i) REQUIRE(close(yv[i], yr[i], rel, abs_tol));

    std::vector<T> sr(n), sv(n);
    k::ref::scale_shift(n, a, b, x.data(), sr.data());
    k::avx2::scale_shift(n, a, b, x.data(), sv.data());
    for (size_t i = 0; i < n; ++i) REQUIRE(close(sv[i], sr[i], rel, abs_tol));

    std::vector<T> rr(n), rv(n);
    k::ref::relu_forward(n, x.data(), rr.data());
    k::avx2::relu_forward(n, x.data(), rv.data());
    for (size_t i = 0; i < n; ++i) REQUIRE(rv[i] == rr[i]);  // branchless == exact
    for (size_t i = 0; i < n; ++i) REQUIRE(rr[i] == (x[i] > T(0) ? x[i] : T(0)));

    std::vector<T> dr(n), dv(n);
    k::ref::relu_backward(n, x.data(), dy.data(), dr.data());
    k::avx2::relu_backward(n, x.data(), dy.data(), dv.data());
    for (size_t i = 0; i < n; ++i) REQUIRE(dv[i] == dr[i]);
    for (size_t i = 0; i < n; ++i) REQUIRE(dr[i] == (x[i] > T(0) ? dy[i] : T(0)));

    REQUIRE(close(k::avx2::sum(n, x.data()), k::ref::sum(n, x.data()), rel,
                  abs_tol * n));
    const T mean = k::ref::sum(n, x.data()) / static_cast<T>(n);
    REQUIRE(close(k::avx2::sumsq_centered(n, x.data(), mean),
                  k::ref::sumsq_centered(n, x.data(), mean), rel, abs_tol * n));
    REQUIRE(close(k::avx2::dot(n, x.data(), dy.data()),
                  k::ref::dot(n, x.data(), dy.data()), rel, abs_tol * n));

    std::vector<T> pr = x, pv = x, vr = y0, vv = y0;
    k::ref::sgd_step(n, pr.data(), g.data(), vr.data(), T(0.01), T(0.9), T(1e-4));
    k::avx2::sgd_step(n, pv.data(), g.data(), vv.data(), T(0.01), T(0.9), T(1e-4));
    for (size_t i = 0; i < n; ++i) {
      REQUIRE(close(pv[i], pr[i], rel, abs_tol));
      REQUIRE(close(vv[i], vr[i], rel, abs_tol));
    }
    // oracle: one explicit momentum step
    for (size_t i = 0; i < n; ++i) {
      const double vexp = 0.9 * static_cast<double>(y0[i]) +
                          static_cast<double>(g[i]) +
                          1e-4 * static_cast<double>(x[i]);
      REQUIRE(close(vr[i], vexp, 1e-5, 1e-6));
      REQUIRE(close(pr[i], static_cast<double>(x[i]) - 0.01 * vexp, 1e-5, 1e-6));
    }
  }
}

TEST_CASE("elementwise kernels: simd equivalence and oracles") {
  elementwise_equivalence<float>(7001, 1e-5, 1e-6);
  elementwise_equivalence<double>(7002, 1e-13, 1e-14);
}

TEST_CASE("backend override is honored") {
  const auto original = k::active_backend();
  k::set_backend(k::Backend::kScalar);
  CHECK(k::active_backend() == k::Backend::kScalar);

  // dispatched call must agree with the reference path bit for bit when the
  // scalar backend is forced
  Rng rng(99);
  std::vector<float> A(24), B(36), C1(24, 0.0f), C2(24, 0.0f);
  fill(A, rng);
  fill(B, rng);
  k::gemm_nn(4, 6, 6, 1.0f, A.data(), 6, B.data(), 6, 0.0f, C1.data(), 6);
  k::ref::gemm_nn(4, 6, 6, 1.0f, A.data(), 6, B.data(), 6, 0.0f, C2.data(), 6);
  CHECK(C1 == C2);

  if (k::avx2_available()) {
    k::set_backend(k::Backend::kAvx2);
    CHECK(k::active_backend() == k::Backend::kAvx2);
    std::vector<float> C3(24, 0.0f), C4(24, 0.0f);
    k::gemm_nn(4, 6, 6, 1.0f, A.data(), 6, B.data(), 6, 0.0f, C3.data(), 6);
    k::avx2::gemm_nn(4, 6, 6, 1.0f, A.data(), 6, B.data(), 6, 0.0f, C4.data(), 6);
    CHECK(C3 == C4);
  }
  k::set_backend(original);
}

TEST_CASE("backend names are stable strings") {
  CHECK(std::string(k::backend_name(k::Backend::kScalar)) == "scalar");
  CHECK(std::string(k::backend_name(k::Backend::kAvx2)) == "avx2");
}
