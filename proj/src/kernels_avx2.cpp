// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma in a separate TU;
// only dispatched to when CPUID reports support.

#ifdef __x86_64__

#include <immintrin.h>

#include <cmath>

#include "cc2d/kernels.hpp"

namespace cc2d::kernels {
namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

// Broadcast-A row panel: 2 rows of A against 16 columns of B per iteration.
// B rows stream through contiguously so this holds up at the sizes im2col emits.
void gemm_panel(int m, int n, int k, const float* a, float* c,
                const float* b, int a_row_stride, int a_col_stride) {
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    const float* a0 = a + static_cast<size_t>(i) * a_row_stride;
    const float* a1 = a + static_cast<size_t>(i + 1) * a_row_stride;
    float* c0 = c + static_cast<size_t>(i) * n;
    float* c1 = c0 + n;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256 acc00 = _mm256_loadu_ps(c0 + j);
      __m256 acc01 = _mm256_loadu_ps(c0 + j + 8);
      __m256 acc10 = _mm256_loadu_ps(c1 + j);
      __m256 acc11 = _mm256_loadu_ps(c1 + j + 8);
      const float* bl = b + j;
      for (int l = 0; l < k; ++l, bl += n) {
        const __m256 b0 = _mm256_loadu_ps(bl);
        const __m256 b1 = _mm256_loadu_ps(bl + 8);
        const __m256 av0 = _mm256_set1_ps(a0[static_cast<size_t>(l) * a_col_stride]);
        const __m256 av1 = _mm256_set1_ps(a1[static_cast<size_t>(l) * a_col_stride]);
        acc00 = _mm256_fmadd_ps(av0, b0, acc00);
        acc01 = _mm256_fmadd_ps(av0, b1, acc01);
        acc10 = _mm256_fmadd_ps(av1, b0, acc10);
        acc11 = _mm256_fmadd_ps(av1, b1, acc11);
      }
      _mm256_storeu_ps(c0 + j, acc00);
      _mm256_storeu_ps(c0 + j + 8, acc01);
      _mm256_storeu_ps(c1 + j, acc10);
      _mm256_storeu_ps(c1 + j + 8, acc11);
    }
    for (; j < n; ++j) {
      float s0 = c0[j], s1 = c1[j];
      for (int l = 0; l < k; ++l) {
        const float bv = b[static_cast<size_t>(l) * n + j];
        s0 += a0[static_cast<size_t>(l) * a_col_stride] * bv;
        s1 += a1[static_cast<size_t>(l) * a_col_stride] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * a_row_stride;
    float* ci = c + static_cast<size_t>(i) * n;
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 acc = _mm256_loadu_ps(ci + j);
      const float* bl = b + j;
      for (int l = 0; l < k; ++l, bl += n)
        acc = _mm256_fmadd_ps(_mm256_set1_ps(ai[static_cast<size_t>(l) * a_col_stride]),
                              _mm256_loadu_ps(bl), acc);
      _mm256_storeu_ps(ci + j, acc);
    }
    for (; j < n; ++j) {
      float s = ci[j];
      for (int l = 0; l < k; ++l)
        s += ai[static_cast<size_t>(l) * a_col_stride] * b[static_cast<size_t>(l) * n + j];
      ci[j] = s;
    }
  }
}

void gemm_nn_avx2(int m, int n, int k, const float* a, const float* b, float* c) {
  gemm_panel(m, n, k, a, c, b, k, 1);
}

void gemm_tn_avx2(int m, int n, int k, const float* a, const float* b, float* c) {
  // A is k x m; row i of the logical matrix strides by 1, columns by m.
  gemm_panel(m, n, k, a, c, b, 1, m);
}

void gemm_nt_avx2(int m, int n, int k, const float* a, const float* b, float* c) {
  // Row-times-row dot products, vectorized along k.
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * k;
    float* ci = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * k;
      __m256 acc0 = _mm256_setzero_ps();
      __m256 acc1 = _mm256_setzero_ps();
      int l = 0;
      for (; l + 16 <= k; l += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(ai + l), _mm256_loadu_ps(bj + l), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(ai + l + 8), _mm256_loadu_ps(bj + l + 8), acc1);
      }
      for (; l + 8 <= k; l += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(ai + l), _mm256_loadu_ps(bj + l), acc0);
      float acc = hsum256(_mm256_add_ps(acc0, acc1));
      for (; l < k; ++l) acc += ai[l] * bj[l];
      ci[j] += acc;
    }
  }
}

void relu_fwd_avx2(const float* x, float* y, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_bwd_avx2(const float* x, const float* gy, float* gx, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(gx + i, _mm256_and_ps(_mm256_loadu_ps(gy + i), mask));
  }
  for (; i < n; ++i) gx[i] = x[i] > 0.f ? gy[i] : 0.f;
}

void axpy_avx2(float alpha, const float* x, float* y, size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_step_avx2(float* p, const float* g, float* m, float* v, size_t n,
                    float lr, float beta1, float beta2, float eps,
                    float bias1, float bias2) {
  const __m256 b1 = _mm256_set1_ps(beta1), ob1 = _mm256_set1_ps(1.f - beta1);
  const __m256 b2 = _mm256_set1_ps(beta2), ob2 = _mm256_set1_ps(1.f - beta2);
  const __m256 ib1 = _mm256_set1_ps(1.f / bias1), ib2 = _mm256_set1_ps(1.f / bias2);
  const __m256 lrv = _mm256_set1_ps(lr), epsv = _mm256_set1_ps(eps);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_fmadd_ps(ob1, gv, _mm256_mul_ps(b1, _mm256_loadu_ps(m + i)));
    __m256 vv = _mm256_fmadd_ps(ob2, _mm256_mul_ps(gv, gv), _mm256_mul_ps(b2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(mv, ib1);
    const __m256 vhat = _mm256_mul_ps(vv, ib2);
    const __m256 den = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i),
                                          _mm256_div_ps(_mm256_mul_ps(lrv, mhat), den)));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
  }
}

void cosine_map_avx2(const float* anchor, const float* feat, int channels, int n,
                     float anchor_norm, float floor, float* out) {
  // Pass over channels accumulating dot and squared norm per pixel, then normalize.
  // `out` doubles as the dot accumulator; nrm2 lives on a small stack tile.
  constexpr int kTile = 4096;
  float nrm2[kTile];
  for (int base = 0; base < n; base += kTile) {
    const int len = n - base < kTile ? n - base : kTile;
    float* dot = out + base;
    for (int i = 0; i < len; ++i) dot[i] = 0.f;
    for (int i = 0; i < len; ++i) nrm2[i] = 0.f;
    for (int ch = 0; ch < channels; ++ch) {
      const float* f = feat + static_cast<size_t>(ch) * n + base;
      const __m256 av = _mm256_set1_ps(anchor[ch]);
      int i = 0;
      for (; i + 8 <= len; i += 8) {
        const __m256 fv = _mm256_loadu_ps(f + i);
        _mm256_storeu_ps(dot + i, _mm256_fmadd_ps(av, fv, _mm256_loadu_ps(dot + i)));
        _mm256_storeu_ps(nrm2 + i, _mm256_fmadd_ps(fv, fv, _mm256_loadu_ps(nrm2 + i)));
      }
      for (; i < len; ++i) {
        dot[i] += anchor[ch] * f[i];
        nrm2[i] += f[i] * f[i];
      }
    }
    const __m256 an = _mm256_set1_ps(anchor_norm);
    const __m256 fl = _mm256_set1_ps(floor);
    int i = 0;
    for (; i + 8 <= len; i += 8) {
      const __m256 den = _mm256_fmadd_ps(an, _mm256_sqrt_ps(_mm256_loadu_ps(nrm2 + i)), fl);
      _mm256_storeu_ps(dot + i, _mm256_div_ps(_mm256_loadu_ps(dot + i), den));
    }
    for (; i < len; ++i) dot[i] /= anchor_norm * std::sqrt(nrm2[i]) + floor;
  }
}

const KernelTable table = {
    gemm_nn_avx2, gemm_tn_avx2, gemm_nt_avx2,
    relu_fwd_avx2, relu_bwd_avx2, axpy_avx2,
    adam_step_avx2, cosine_map_avx2,
    "avx2",
};

}  // namespace

const KernelTable& avx2() { return table; }

}  // namespace cc2d::kernels

#endif  // __x86_64__
