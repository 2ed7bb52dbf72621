#pragma once
// Arithmetic inner loops behind the network and similarity code.
// Each kernel has a scalar reference implementation and, where it pays off,
// an AVX2+FMA variant. The active table is chosen once at startup from CPUID;
// CC2D_FORCE_SCALAR=1 in the environment pins the scalar path.

#include <cstddef>

namespace cc2d::kernels {

struct KernelTable {
  // C[m x n] += A[m x k] * B[k x n], row-major, contiguous.
  void (*gemm_nn)(int m, int n, int k, const float* a, const float* b, float* c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(int m, int n, int k, const float* a, const float* b, float* c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(int m, int n, int k, const float* a, const float* b, float* c);

  void (*relu_fwd)(const float* x, float* y, size_t n);
  void (*relu_bwd)(const float* x, const float* gy, float* gx, size_t n);
  void (*axpy)(float alpha, const float* x, float* y, size_t n);

  // Adam with bias correction folded into the step scale.
  void (*adam_step)(float* p, const float* g, float* m, float* v, size_t n,
                    float lr, float beta1, float beta2, float eps,
                    float bias1, float bias2);

  // out[i] = dot(anchor, feat[:,i]) / (|anchor| * |feat[:,i]| + floor), feat is C planes of n pixels.
  void (*cosine_map)(const float* anchor, const float* feat, int channels, int n,
                     float anchor_norm, float floor, float* out);

  const char* name;
};

const KernelTable& scalar();
#ifdef __x86_64__
const KernelTable& avx2();
#endif
bool avx2_supported();

// Active table, resolved once (thread-safe static init).
const KernelTable& active();

}  // namespace cc2d::kernels
