#pragma once
// Dense CHW float tensor. All feature maps in the pipeline use this layout;
// vectors are (c, 1, 1) and matrices (1, h, w).

#include <cassert>
#include <cstddef>
#include <vector>

namespace cc2d {

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.f) {}

  static Tensor vec(int n) { return Tensor(n, 1, 1); }
  static Tensor map(int h, int w) { return Tensor(1, h, w); }

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }

  float* data() { return v.data(); }
  const float* data() const { return v.data(); }
  float* chan(int ci) { return v.data() + static_cast<size_t>(ci) * plane(); }
  const float* chan(int ci) const { return v.data() + static_cast<size_t>(ci) * plane(); }

  float& at(int ci, int y, int x) {
    assert(ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  float at(int ci, int y, int x) const {
    assert(ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  void zero() { std::fill(v.begin(), v.end(), 0.f); }
};

}  // namespace cc2d
