#pragma once
// Minimal layer zoo with explicit forward/backward. No autograd: networks are
// small fixed graphs and each module wires its own backward pass. A layer
// instance caches one forward activation, so the calling pattern is
// forward -> backward per sample, accumulating parameter gradients.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cc2d/tensor.hpp"

namespace cc2d::nn {

struct Param {
  Tensor val;
  Tensor grad;
};

using ParamMap = std::map<std::string, Param*>;

void zero_grads(const ParamMap& params);

class Adam {
 public:
  Adam(ParamMap params, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

  void step(float lr);
  void zero_grad();
  int64_t steps_taken() const { return t_; }

  // Optimizer state round-trips through checkpoints.
  std::map<std::string, std::pair<Tensor, Tensor>> state() const;
  void restore(const std::map<std::string, std::pair<Tensor, Tensor>>& state, int64_t t);

 private:
  ParamMap params_;
  std::map<std::string, std::pair<Tensor, Tensor>> mv_;
  float beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

class Conv2d {
 public:
  // 'same' convolution, stride 1, square kernel, optional dilation.
  Conv2d(int cin, int cout, int ksize, int dilation = 1);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  void init(std::mt19937& rng, float stddev = 0.f);  // 0 => He initialization
  void params(ParamMap& out, const std::string& prefix);

  int cin() const { return cin_; }
  int cout() const { return cout_; }

 private:
  int cin_, cout_, k_, dil_, pad_;
  Param w_;  // [cout, cin*k*k]
  Param b_;  // [cout]
  Tensor col_;
  int xh_ = 0, xw_ = 0;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

 private:
  Tensor x_;
};

class MaxPool2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

 private:
  std::vector<int32_t> argmax_;
  int xc_ = 0, xh_ = 0, xw_ = 0;
};

// Bilinear 2x upsampling (align_corners = false).
class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);

 private:
  int xc_ = 0, xh_ = 0, xw_ = 0;
};

Tensor concat(const Tensor& a, const Tensor& b);
// Splits a gradient of concat(a, b) back into per-input gradients.
std::pair<Tensor, Tensor> split(const Tensor& g, int ca, int cb);

}  // namespace cc2d::nn
