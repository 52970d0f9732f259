#include <atomic>
#include <cstdlib>
#include <string>

#include "smia/error.hpp"
#include "smia/simd/kernels.hpp"

namespace smia::simd {
namespace {

Isa detect() {
#if defined(SMIA_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::avx2;
#endif
  return Isa::scalar;
}

Isa initial() {
  const Isa best = detect();
  if (const char* env = std::getenv("SMIA_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && best == Isa::avx2) return Isa::avx2;
  }
  return best;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(initial())};
  return table;
}

}  // namespace

bool isa_supported(Isa isa) { return isa == Isa::scalar || detect() == Isa::avx2; }

const KernelTable& kernels_for(Isa isa) {
#if defined(SMIA_HAVE_AVX2)
  if (isa == Isa::avx2) {
    if (detect() != Isa::avx2) fail(ErrorKind::config, "AVX2/FMA kernels requested but not supported by this CPU");
    return avx2_kernels();
  }
#else
  if (isa == Isa::avx2) fail(ErrorKind::config, "AVX2 kernels are not compiled into this build");
#endif
  return scalar_kernels();
}

Isa active_isa() { return active_table().load()->isa; }

void set_isa(Isa isa) { active_table().store(&kernels_for(isa)); }

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace smia::simd
