#pragma once

// Dense double-precision kernels used by the attack network and the embedding
// utilities. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The active table is chosen once at startup from cpuid and
// can be pinned with set_isa() or the SMIA_ISA environment variable
// ("scalar" | "avx2"). Variants agree to rounding, not bit-for-bit: the vector
// paths reassociate sums.
//
// All matrices are dense row-major and every GEMM accumulates into C.

#include <cstddef>
#include <span>
#include <string_view>

namespace smia::simd {

enum class Isa { scalar, avx2 };

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 1;  // 1-based, used for bias correction
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // Bias-corrected Adam step over one tensor; updates param, m and v in place.
  void (*adam)(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamParams& p);
};

const KernelTable& scalar_kernels();
#if defined(SMIA_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

bool isa_supported(Isa isa);
Isa active_isa();
// Throws smia::Error(config) when the ISA is not supported on this CPU.
void set_isa(Isa isa);
const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

}  // namespace smia::simd
