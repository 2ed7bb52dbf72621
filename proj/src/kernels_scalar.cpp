// Scalar reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against.

#include <cmath>

#include "cc2d/kernels.hpp"

namespace cc2d::kernels {
namespace {

void gemm_nn_scalar(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<size_t>(i) * n;
    const float* ai = a + static_cast<size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const float av = ai[l];
      if (av == 0.f) continue;
      const float* bl = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void gemm_tn_scalar(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int l = 0; l < k; ++l) {
    const float* al = a + static_cast<size_t>(l) * m;
    const float* bl = b + static_cast<size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const float av = al[i];
      if (av == 0.f) continue;
      float* ci = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void gemm_nt_scalar(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * k;
    float* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * k;
      float acc = 0.f;
      for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] += acc;
    }
  }
}

void relu_fwd_scalar(const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_bwd_scalar(const float* x, const float* gy, float* gx, size_t n) {
  for (size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.f ? gy[i] : 0.f;
}

void axpy_scalar(float alpha, const float* x, float* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_step_scalar(float* p, const float* g, float* m, float* v, size_t n,
                      float lr, float beta1, float beta2, float eps,
                      float bias1, float bias2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    const float mhat = m[i] / bias1;
    const float vhat = v[i] / bias2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void cosine_map_scalar(const float* anchor, const float* feat, int channels, int n,
                       float anchor_norm, float floor, float* out) {
  for (int i = 0; i < n; ++i) {
    float dot = 0.f, nrm2 = 0.f;
    for (int ch = 0; ch < channels; ++ch) {
      const float f = feat[static_cast<size_t>(ch) * n + i];
      dot += anchor[ch] * f;
      nrm2 += f * f;
    }
    out[i] = dot / (anchor_norm * std::sqrt(nrm2) + floor);
  }
}

const KernelTable table = {
    gemm_nn_scalar, gemm_tn_scalar, gemm_nt_scalar,
    relu_fwd_scalar, relu_bwd_scalar, axpy_scalar,
    adam_step_scalar, cosine_map_scalar,
    "scalar",
};

}  // namespace

const KernelTable& scalar() { return table; }

}  // namespace cc2d::kernels
