#include <cstdlib>
#include <cstring>

#include "xalign/kernels.hpp"

namespace xalign::kernels {

#if defined(XALIGN_HAVE_AVX2_TU)
const Backend* avx2_backend_impl();
#endif

const Backend* avx2_backend() {
#if defined(XALIGN_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))
  static const Backend* b = []() -> const Backend* {
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
      return avx2_backend_impl();
    return nullptr;
  }();
  return b;
#else
  return nullptr;
#endif
}

static const Backend* resolve() {
  const char* pref = std::getenv("XALIGN_SIMD");
  if (pref && std::strcmp(pref, "scalar") == 0) return &scalar_backend();
  if (pref && std::strcmp(pref, "avx2") == 0) {
    if (const Backend* b = avx2_backend()) return b;
    return &scalar_backend();  // requested ISA unavailable, fall back
  }
  if (const Backend* b = avx2_backend()) return b;
  return &scalar_backend();
}

const Backend& active() {
  static const Backend* b = resolve();
  return *b;
}

}  // namespace xalign::kernels
