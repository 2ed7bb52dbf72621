#pragma once
// Stage-I similarity machinery: cosine similarity maps, matrices of interest,
// and the tempered-softmax cross-entropy loss summed over levels.

#include <cmath>
#include <vector>

#include "cc2d/tensor.hpp"

namespace cc2d {

inline constexpr float kNormFloor = 1e-8f;

// out[y][x] = <anchor, feat[:,y,x]> / (|anchor| |feat[:,y,x]| + kNormFloor).
Tensor cosine_similarity_map(const Tensor& anchor, const Tensor& feat);

// Gradients of sum(gsim * sim) w.r.t. anchor and feature map.
void cosine_similarity_backward(const Tensor& anchor, const Tensor& feat, const Tensor& gsim,
                                Tensor& ganchor, Tensor& gfeat);

struct MatrixOfInterest {
  int level = 0;
  Tensor values;  // 1 x n x n window of the similarity map
  int crop_x0 = 0, crop_y0 = 0;  // level-grid coords of values(0,0); negative when padded
  int target_row = 0, target_col = 0;  // one-hot cell inside values
};

// Deepest level: the full map with the one-hot at the target grid cell.
// Other levels: alpha x alpha crop centered on the target, zero-padded at the
// borders, one-hot at the center.
MatrixOfInterest build_matrix_of_interest(const Tensor& sim, int level, int target_gx, int target_gy,
                                          int alpha, bool deepest);

// -log softmax(values * tau)[target]; writes d(loss)/d(values) when grad != null.
// Templated so tests can run the same code in double precision.
template <typename T>
T tempered_softmax_ce(const T* values, int n, int target_idx, T tau, T* grad = nullptr) {
  T vmax = values[0];
  for (int i = 1; i < n; ++i) vmax = std::max(vmax, values[i]);
  T z = 0;
  for (int i = 0; i < n; ++i) z += std::exp((values[i] - vmax) * tau);
  const T logz = std::log(z) + vmax * tau;
  const T loss = logz - values[target_idx] * tau;
  if (grad) {
    for (int i = 0; i < n; ++i) grad[i] = tau * std::exp(values[i] * tau - logz);
    grad[target_idx] -= tau;
  }
  return loss;
}

// Sum of per-level tempered softmax CE losses (Eq. over enabled levels);
// per-matrix gradients are written into grads when non-null.
double ssl_loss(const std::vector<MatrixOfInterest>& mats, double tau,
                std::vector<Tensor>* grads = nullptr);

// Scatters a matrix-of-interest gradient back onto the similarity map grid,
// dropping cells that fell in the padding.
void scatter_moi_grad(const MatrixOfInterest& moi, const Tensor& gvalues, Tensor& gsim);

}  // namespace cc2d
