#include "cc2d/ssl.hpp"

#include <stdexcept>

#include "cc2d/kernels.hpp"

namespace cc2d {

Tensor cosine_similarity_map(const Tensor& anchor, const Tensor& feat) {
  if (anchor.c != feat.c || anchor.h != 1 || anchor.w != 1)
    throw std::invalid_argument("cosine_similarity_map: anchor/feature channel mismatch");
  float a2 = 0.f;
  for (int c = 0; c < anchor.c; ++c) a2 += anchor.v[c] * anchor.v[c];
  const float anorm = std::sqrt(a2);
  Tensor out(1, feat.h, feat.w);
  kernels::active().cosine_map(anchor.data(), feat.data(), feat.c, feat.h * feat.w, anorm,
                               kNormFloor, out.data());
  return out;
}

void cosine_similarity_backward(const Tensor& anchor, const Tensor& feat, const Tensor& gsim,
                                Tensor& ganchor, Tensor& gfeat) {
  const int n = feat.h * feat.w;
  ganchor = Tensor::vec(anchor.c);
  gfeat = Tensor(feat.c, feat.h, feat.w);
  float a2 = 0.f;
  for (int c = 0; c < anchor.c; ++c) a2 += anchor.v[c] * anchor.v[c];
  const float anorm = std::max(std::sqrt(a2), 1e-12f);

  for (int i = 0; i < n; ++i) {
    const float g = gsim.v[i];
    if (g == 0.f) continue;
    float dot = 0.f, f2 = 0.f;
    for (int c = 0; c < feat.c; ++c) {
      const float fv = feat.v[static_cast<size_t>(c) * n + i];
      dot += anchor.v[c] * fv;
      f2 += fv * fv;
    }
    const float fnorm = std::max(std::sqrt(f2), 1e-12f);
    const float den = anorm * fnorm + kNormFloor;
    const float inv_den = 1.f / den;
    const float s_over_den = dot * inv_den * inv_den;
    for (int c = 0; c < feat.c; ++c) {
      const float fv = feat.v[static_cast<size_t>(c) * n + i];
      ganchor.v[c] += g * (fv * inv_den - s_over_den * (fnorm / anorm) * anchor.v[c]);
      gfeat.v[static_cast<size_t>(c) * n + i] = g * (anchor.v[c] * inv_den - s_over_den * (anorm / fnorm) * fv);
    }
  }
}

MatrixOfInterest build_matrix_of_interest(const Tensor& sim, int level, int target_gx, int target_gy,
                                          int alpha, bool deepest) {
  if (target_gx < 0 || target_gx >= sim.w || target_gy < 0 || target_gy >= sim.h)
    throw std::out_of_range("build_matrix_of_interest: target outside level grid");
  MatrixOfInterest moi;
  moi.level = level;
  if (deepest) {
    moi.values = sim;
    moi.crop_x0 = 0;
    moi.crop_y0 = 0;
    moi.target_col = target_gx;
    moi.target_row = target_gy;
    return moi;
  }
  const int half = alpha / 2;
  moi.values = Tensor(1, alpha, alpha);
  moi.crop_x0 = target_gx - half;
  moi.crop_y0 = target_gy - half;
  for (int r = 0; r < alpha; ++r) {
    const int sy = moi.crop_y0 + r;
    for (int c = 0; c < alpha; ++c) {
      const int sx = moi.crop_x0 + c;
      moi.values.at(0, r, c) =
          (sy >= 0 && sy < sim.h && sx >= 0 && sx < sim.w) ? sim.at(0, sy, sx) : 0.f;
    }
  }
  moi.target_row = half;
  moi.target_col = half;
  return moi;
}

double ssl_loss(const std::vector<MatrixOfInterest>& mats, double tau, std::vector<Tensor>* grads) {
  double total = 0.0;
  if (grads) grads->assign(mats.size(), Tensor());
  for (size_t i = 0; i < mats.size(); ++i) {
    const auto& m = mats[i];
    const int n = m.values.h * m.values.w;
    const int target = m.target_row * m.values.w + m.target_col;
    if (grads) {
      Tensor g(1, m.values.h, m.values.w);
      total += tempered_softmax_ce<float>(m.values.data(), n, target, static_cast<float>(tau), g.data());
      (*grads)[i] = std::move(g);
    } else {
      total += tempered_softmax_ce<float>(m.values.data(), n, target, static_cast<float>(tau));
    }
  }
  return total;
}

void scatter_moi_grad(const MatrixOfInterest& moi, const Tensor& gvalues, Tensor& gsim) {
  for (int r = 0; r < gvalues.h; ++r) {
    const int sy = moi.crop_y0 + r;
    if (sy < 0 || sy >= gsim.h) continue;
    for (int c = 0; c < gvalues.w; ++c) {
      const int sx = moi.crop_x0 + c;
      if (sx < 0 || sx >= gsim.w) continue;
      gsim.at(0, sy, sx) += gvalues.at(0, r, c);
    }
  }
}

}  // namespace cc2d
