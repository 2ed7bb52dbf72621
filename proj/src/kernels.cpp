#include "cc2d/kernels.hpp"

#include <cstdlib>

namespace cc2d::kernels {

bool avx2_supported() {
#if defined(__x86_64__) && defined(CC2D_BUILD_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* force = std::getenv("CC2D_FORCE_SCALAR");
    if (force && force[0] == '1') return &scalar();
#if defined(__x86_64__) && defined(CC2D_BUILD_AVX2)
    if (avx2_supported()) return &avx2();
#endif
    return &scalar();
  }();
  return *chosen;
}

}  // namespace cc2d::kernels
