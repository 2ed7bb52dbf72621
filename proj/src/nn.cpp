#include "cc2d/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "cc2d/kernels.hpp"

namespace cc2d::nn {
namespace {

// im2col for 'same' stride-1 convolution: col[(ci*k+ky)*k+kx][y*w+x].
void im2col(const Tensor& x, int k, int dil, int pad, Tensor& col) {
  const int hw = x.h * x.w;
  col = Tensor(x.c * k * k, 1, hw);
  float* dst = col.data();
  for (int ci = 0; ci < x.c; ++ci) {
    const float* src = x.chan(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int dy = ky * dil - pad;
        const int dx = kx * dil - pad;
        for (int y = 0; y < x.h; ++y) {
          const int sy = y + dy;
          float* row = dst + static_cast<size_t>(y) * x.w;
          if (sy < 0 || sy >= x.h) {
            std::fill(row, row + x.w, 0.f);
            continue;
          }
          const float* srow = src + static_cast<size_t>(sy) * x.w;
          for (int xx = 0; xx < x.w; ++xx) {
            const int sx = xx + dx;
            row[xx] = (sx >= 0 && sx < x.w) ? srow[sx] : 0.f;
          }
        }
        dst += hw;
      }
    }
  }
}

void col2im(const Tensor& gcol, int c, int h, int w, int k, int dil, int pad, Tensor& gx) {
  gx = Tensor(c, h, w);
  const int hw = h * w;
  const float* src = gcol.data();
  for (int ci = 0; ci < c; ++ci) {
    float* dst = gx.chan(ci);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int dy = ky * dil - pad;
        const int dx = kx * dil - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const float* row = src + static_cast<size_t>(y) * w;
          float* drow = dst + static_cast<size_t>(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + dx;
            if (sx >= 0 && sx < w) drow[sx] += row[xx];
          }
        }
        src += hw;
      }
    }
  }
}

}  // namespace

void zero_grads(const ParamMap& params) {
  for (auto& [name, p] : params) p->grad.zero();
}

Adam::Adam(ParamMap params, float beta1, float beta2, float eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& [name, p] : params_) {
    mv_[name] = {Tensor(p->val.c, p->val.h, p->val.w), Tensor(p->val.c, p->val.h, p->val.w)};
  }
}

void Adam::step(float lr) {
  ++t_;
  const float bias1 = 1.f - std::pow(beta1_, static_cast<float>(t_));
  const float bias2 = 1.f - std::pow(beta2_, static_cast<float>(t_));
  const auto& k = kernels::active();
  for (auto& [name, p] : params_) {
    auto& [m, v] = mv_[name];
    k.adam_step(p->val.data(), p->grad.data(), m.data(), v.data(), p->val.size(),
                lr, beta1_, beta2_, eps_, bias1, bias2);
  }
}

void Adam::zero_grad() { zero_grads(params_); }

std::map<std::string, std::pair<Tensor, Tensor>> Adam::state() const { return mv_; }

void Adam::restore(const std::map<std::string, std::pair<Tensor, Tensor>>& state, int64_t t) {
  for (auto& [name, mv] : state) {
    auto it = mv_.find(name);
    if (it == mv_.end()) throw std::runtime_error("adam restore: unknown parameter " + name);
    it->second = mv;
  }
  t_ = t;
}

Conv2d::Conv2d(int cin, int cout, int ksize, int dilation)
    : cin_(cin), cout_(cout), k_(ksize), dil_(dilation), pad_(dilation * (ksize - 1) / 2) {
  w_.val = Tensor(cout, 1, cin * ksize * ksize);
  w_.grad = Tensor(cout, 1, cin * ksize * ksize);
  b_.val = Tensor::vec(cout);
  b_.grad = Tensor::vec(cout);
}

void Conv2d::init(std::mt19937& rng, float stddev) {
  const int fan_in = cin_ * k_ * k_;
  const float s = stddev > 0.f ? stddev : std::sqrt(2.f / fan_in);
  std::normal_distribution<float> dist(0.f, s);
  for (auto& x : w_.val.v) x = dist(rng);
  b_.val.zero();
}

void Conv2d::params(ParamMap& out, const std::string& prefix) {
  out[prefix + ".w"] = &w_;
  out[prefix + ".b"] = &b_;
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.c != cin_) throw std::invalid_argument("conv: channel mismatch");
  xh_ = x.h;
  xw_ = x.w;
  im2col(x, k_, dil_, pad_, col_);
  Tensor y(cout_, x.h, x.w);
  const int hw = x.h * x.w;
  for (int co = 0; co < cout_; ++co)
    std::fill(y.chan(co), y.chan(co) + hw, b_.val.v[co]);
  kernels::active().gemm_nn(cout_, hw, cin_ * k_ * k_, w_.val.data(), col_.data(), y.data());
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const int hw = xh_ * xw_;
  const int ckk = cin_ * k_ * k_;
  const auto& k = kernels::active();
  // dW += gy * col^T, db += row sums of gy.
  k.gemm_nt(cout_, ckk, hw, gy.data(), col_.data(), w_.grad.data());
  for (int co = 0; co < cout_; ++co) {
    const float* g = gy.chan(co);
    float acc = 0.f;
    for (int i = 0; i < hw; ++i) acc += g[i];
    b_.grad.v[co] += acc;
  }
  // dcol = W^T * gy, scattered back to the input grid.
  Tensor gcol(ckk, 1, hw);
  k.gemm_tn(ckk, hw, cout_, w_.val.data(), gy.data(), gcol.data());
  Tensor gx;
  col2im(gcol, cin_, xh_, xw_, k_, dil_, pad_, gx);
  return gx;
}

Tensor ReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor y(x.c, x.h, x.w);
  kernels::active().relu_fwd(x.data(), y.data(), x.size());
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  Tensor gx(x_.c, x_.h, x_.w);
  kernels::active().relu_bwd(x_.data(), gy.data(), gx.data(), gx.size());
  return gx;
}

Tensor MaxPool2::forward(const Tensor& x) {
  if (x.h % 2 || x.w % 2) throw std::invalid_argument("maxpool: odd spatial side");
  xc_ = x.c;
  xh_ = x.h;
  xw_ = x.w;
  const int oh = x.h / 2, ow = x.w / 2;
  Tensor y(x.c, oh, ow);
  argmax_.assign(y.size(), 0);
  for (int ci = 0; ci < x.c; ++ci) {
    const float* src = x.chan(ci);
    float* dst = y.chan(ci);
    int32_t* am = argmax_.data() + static_cast<size_t>(ci) * oh * ow;
    for (int y0 = 0; y0 < oh; ++y0) {
      for (int x0 = 0; x0 < ow; ++x0) {
        const int base = (2 * y0) * x.w + 2 * x0;
        int best = base;
        float bv = src[base];
        const int cands[3] = {base + 1, base + x.w, base + x.w + 1};
        for (int c2 : cands)
          if (src[c2] > bv) {
            bv = src[c2];
            best = c2;
          }
        dst[y0 * ow + x0] = bv;
        am[y0 * ow + x0] = best;
      }
    }
  }
  return y;
}

Tensor MaxPool2::backward(const Tensor& gy) {
  Tensor gx(xc_, xh_, xw_);
  const int ohw = gy.h * gy.w;
  for (int ci = 0; ci < xc_; ++ci) {
    const float* g = gy.chan(ci);
    float* dst = gx.chan(ci);
    const int32_t* am = argmax_.data() + static_cast<size_t>(ci) * ohw;
    for (int i = 0; i < ohw; ++i) dst[am[i]] += g[i];
  }
  return gx;
}

Tensor Upsample2x::forward(const Tensor& x) {
  xc_ = x.c;
  xh_ = x.h;
  xw_ = x.w;
  const int oh = 2 * x.h, ow = 2 * x.w;
  Tensor y(x.c, oh, ow);
  for (int ci = 0; ci < x.c; ++ci) {
    const float* src = x.chan(ci);
    float* dst = y.chan(ci);
    for (int yo = 0; yo < oh; ++yo) {
      const float sy = (yo + 0.5f) * 0.5f - 0.5f;
      int y0 = static_cast<int>(std::floor(sy));
      float wy = sy - y0;
      int y1 = y0 + 1;
      y0 = std::max(0, std::min(y0, x.h - 1));
      y1 = std::max(0, std::min(y1, x.h - 1));
      const float* r0 = src + static_cast<size_t>(y0) * x.w;
      const float* r1 = src + static_cast<size_t>(y1) * x.w;
      for (int xo = 0; xo < ow; ++xo) {
        const float sx = (xo + 0.5f) * 0.5f - 0.5f;
        int x0 = static_cast<int>(std::floor(sx));
        float wx = sx - x0;
        int x1 = x0 + 1;
        x0 = std::max(0, std::min(x0, x.w - 1));
        x1 = std::max(0, std::min(x1, x.w - 1));
        const float top = r0[x0] * (1.f - wx) + r0[x1] * wx;
        const float bot = r1[x0] * (1.f - wx) + r1[x1] * wx;
        dst[yo * ow + xo] = top * (1.f - wy) + bot * wy;
      }
    }
  }
  return y;
}

Tensor Upsample2x::backward(const Tensor& gy) {
  Tensor gx(xc_, xh_, xw_);
  const int oh = 2 * xh_, ow = 2 * xw_;
  for (int ci = 0; ci < xc_; ++ci) {
    const float* g = gy.chan(ci);
    float* dst = gx.chan(ci);
    for (int yo = 0; yo < oh; ++yo) {
      const float sy = (yo + 0.5f) * 0.5f - 0.5f;
      int y0 = static_cast<int>(std::floor(sy));
      float wy = sy - y0;
      int y1 = y0 + 1;
      y0 = std::max(0, std::min(y0, xh_ - 1));
      y1 = std::max(0, std::min(y1, xh_ - 1));
      for (int xo = 0; xo < ow; ++xo) {
        const float sx = (xo + 0.5f) * 0.5f - 0.5f;
        int x0 = static_cast<int>(std::floor(sx));
        float wx = sx - x0;
        int x1 = x0 + 1;
        x0 = std::max(0, std::min(x0, xw_ - 1));
        x1 = std::max(0, std::min(x1, xw_ - 1));
        const float gv = g[yo * ow + xo];
        dst[y0 * xw_ + x0] += gv * (1.f - wx) * (1.f - wy);
        dst[y0 * xw_ + x1] += gv * wx * (1.f - wy);
        dst[y1 * xw_ + x0] += gv * (1.f - wx) * wy;
        dst[y1 * xw_ + x1] += gv * wx * wy;
      }
    }
  }
  return gx;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("concat: spatial mismatch");
  Tensor y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
  return y;
}

std::pair<Tensor, Tensor> split(const Tensor& g, int ca, int cb) {
  if (g.c != ca + cb) throw std::invalid_argument("split: channel mismatch");
  Tensor ga(ca, g.h, g.w), gb(cb, g.h, g.w);
  std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
  return {std::move(ga), std::move(gb)};
}

}  // namespace cc2d::nn
