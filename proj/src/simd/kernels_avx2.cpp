// Compiled with -mavx2 -mfma; only reached after a cpuid check in dispatch.cpp.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "smia/simd/kernels.hpp"

namespace smia::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Blocked GEMM: C[m x n] += sum_p A(i, p) * B(p, j), with A(i, p) = a[i * si + p * sp]
// and B(p, j) = b[p * bp + j * bj]. B is packed per (kc x nc) block into strips of
// 8 columns (zero padded), which stay in L2 while every row block of A sweeps them.
// Each output still accumulates over p in increasing order.
constexpr std::size_t kMR = 6;
constexpr std::size_t kNR = 8;
constexpr std::size_t kKC = 128;
constexpr std::size_t kNC = 512;

struct Operand {
  const double* ptr;
  std::size_t row_stride;
  std::size_t col_stride;
};

void pack_b(const Operand& b, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, double* out) {
  for (std::size_t s = 0; s < nc; s += kNR) {
    const std::size_t w = std::min(kNR, nc - s);
    for (std::size_t p = 0; p < kc; ++p) {
      const double* src = b.ptr + (p0 + p) * b.row_stride + (j0 + s) * b.col_stride;
      double* dst = out + s * kc + p * kNR;
      std::size_t q = 0;
      for (; q < w; ++q) dst[q] = src[q * b.col_stride];
      for (; q < kNR; ++q) dst[q] = 0.0;
    }
  }
}

template <std::size_t R>
void micro_kernel(const Operand& a, std::size_t i0, std::size_t p0, std::size_t kc, const double* strip, double* c,
                  std::size_t ldc, std::size_t width) {
  __m256d acc[R][2];
  double tail[R][kNR];
  const bool full = width == kNR;
#pragma GCC unroll 6
  for (std::size_t r = 0; r < R; ++r) {
    double* cr = c + (i0 + r) * ldc;
    if (full) {
      acc[r][0] = _mm256_loadu_pd(cr);
      acc[r][1] = _mm256_loadu_pd(cr + 4);
    } else {
      for (std::size_t q = 0; q < kNR; ++q) tail[r][q] = q < width ? cr[q] : 0.0;
      acc[r][0] = _mm256_loadu_pd(tail[r]);
      acc[r][1] = _mm256_loadu_pd(tail[r] + 4);
    }
  }
  const double* arow[R];
#pragma GCC unroll 6
  for (std::size_t r = 0; r < R; ++r) arow[r] = a.ptr + (i0 + r) * a.row_stride + p0 * a.col_stride;
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256d b0 = _mm256_loadu_pd(strip + p * kNR);
    const __m256d b1 = _mm256_loadu_pd(strip + p * kNR + 4);
    const std::size_t off = p * a.col_stride;
#pragma GCC unroll 6
    for (std::size_t r = 0; r < R; ++r) {
      const __m256d x = _mm256_broadcast_sd(arow[r] + off);
      acc[r][0] = _mm256_fmadd_pd(x, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(x, b1, acc[r][1]);
    }
  }
#pragma GCC unroll 6
  for (std::size_t r = 0; r < R; ++r) {
    double* cr = c + (i0 + r) * ldc;
    if (full) {
      _mm256_storeu_pd(cr, acc[r][0]);
      _mm256_storeu_pd(cr + 4, acc[r][1]);
    } else {
      _mm256_storeu_pd(tail[r], acc[r][0]);
      _mm256_storeu_pd(tail[r] + 4, acc[r][1]);
      for (std::size_t q = 0; q < width; ++q) cr[q] = tail[r][q];
    }
  }
}

using MicroKernel = void (*)(const Operand&, std::size_t, std::size_t, std::size_t, const double*, double*,
                             std::size_t, std::size_t);
constexpr MicroKernel kMicro[kMR + 1] = {nullptr,          micro_kernel<1>, micro_kernel<2>, micro_kernel<3>,
                                         micro_kernel<4>, micro_kernel<5>, micro_kernel<6>};

void gemm_blocked(std::size_t m, std::size_t n, std::size_t k, const Operand& a, const Operand& b, double* c) {
  if (m == 0 || n == 0 || k == 0) return;
  thread_local std::vector<double> packed;
  packed.resize(kKC * ((std::min(n, kNC) + kNR - 1) / kNR) * kNR);
  for (std::size_t j0 = 0; j0 < n; j0 += kNC) {
    const std::size_t nc = std::min(kNC, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kKC) {
      const std::size_t kc = std::min(kKC, k - p0);
      pack_b(b, p0, kc, j0, nc, packed.data());
      for (std::size_t i0 = 0; i0 < m; i0 += kMR) {
        const std::size_t rows = std::min(kMR, m - i0);
        for (std::size_t s = 0; s < nc; s += kNR) {
          kMicro[rows](a, i0, p0, kc, packed.data() + s * kc, c + j0 + s, n, std::min(kNR, nc - s));
        }
      }
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_blocked(m, n, k, {a, k, 1}, {b, 1, k}, c);
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_blocked(m, n, k, {a, k, 1}, {b, n, 1}, c);
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  gemm_blocked(m, n, k, {a, 1, m}, {b, n, 1}, c);
}

void adam_avx2(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamParams& p) {
  const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(p.step));
  const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(p.step));
  const double step_size = p.lr / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  const __m256d b1 = _mm256_set1_pd(p.beta1), nb1 = _mm256_set1_pd(1.0 - p.beta1);
  const __m256d b2 = _mm256_set1_pd(p.beta2), nb2 = _mm256_set1_pd(1.0 - p.beta2);
  const __m256d eps = _mm256_set1_pd(p.eps), ss = _mm256_set1_pd(step_size);
  const __m256d isb = _mm256_set1_pd(inv_sqrt_bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(nb1, g));
    const __m256d vi =
        _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(nb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_mul_pd(_mm256_sqrt_pd(vi), isb), eps);
    const __m256d upd = _mm256_mul_pd(ss, _mm256_div_pd(mi, denom));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * (g * g);
    const double denom = std::sqrt(v[i]) * inv_sqrt_bc2 + p.eps;
    param[i] -= step_size * (m[i] / denom);
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::avx2, dot_avx2, axpy_avx2, gemm_nt_avx2, gemm_nn_avx2, gemm_tn_avx2, adam_avx2};
  return table;
}

}  // namespace smia::simd
