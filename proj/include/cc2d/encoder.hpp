#pragma once
// Cascade feature extractor: VGG-style encoder, U-Net decoder, and a
// per-scale head (ASPP + 1x1 convolution) projecting every decoder scale to a
// common embedding width. Emits five embedding maps at strides 2..32.

#include <array>
#include <memory>
#include <random>

#include "cc2d/config.hpp"
#include "cc2d/geometry.hpp"
#include "cc2d/nn.hpp"
#include "cc2d/tensor.hpp"

namespace cc2d {

enum class EmbedSource { kQuery, kPatch };

struct CascadeEmbeddings {
  // levels[i-1] holds the level-i map: embed_dim channels at side / 2^i.
  std::array<Tensor, kNumLevels> levels;
  EmbedSource source = EmbedSource::kQuery;
};

namespace detail {

// convs_per_block x (Conv3x3 + ReLU).
class ConvBlock {
 public:
  ConvBlock(int cin, int cout, int n_convs);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  void init(std::mt19937& rng, float stddev);
  void params(nn::ParamMap& out, const std::string& prefix);

 private:
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::ReLU> relus_;
};

// Parallel dilated 3x3 branches, concatenated, then a 1x1 projection.
class AsppHead {
 public:
  AsppHead(int cin, int cout, const std::vector<int>& dilations, int branch_channels);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  void init(std::mt19937& rng, float stddev);
  void params(nn::ParamMap& out, const std::string& prefix);

 private:
  std::vector<nn::Conv2d> branches_;
  std::vector<nn::ReLU> relus_;
  nn::Conv2d project_;
  int branch_ch_;
};

}  // namespace detail

class CascadeEncoder {
 public:
  CascadeEncoder(const ExtractorConfig& cfg, std::mt19937& rng);

  // Input side must be divisible by 32 (checked before any computation).
  CascadeEmbeddings extract(const Tensor& image, EmbedSource source);

  // Gradients per level, in the same layout as CascadeEmbeddings.levels.
  // Empty tensors (size 0) are treated as zero. Must follow an extract() call.
  void backward(const std::array<Tensor, kNumLevels>& grad_levels);

  void params(nn::ParamMap& out, const std::string& prefix);
  const ExtractorConfig& config() const { return cfg_; }

 private:
  ExtractorConfig cfg_;
  detail::ConvBlock stem_;
  std::vector<detail::ConvBlock> enc_;     // 5 pooled stages
  std::vector<nn::MaxPool2> pools_;        // 5
  std::vector<detail::ConvBlock> dec_;     // levels 4..1
  std::vector<nn::Upsample2x> ups_;        // 4
  std::vector<detail::AsppHead> heads_;    // levels 1..5 (index level-1)

  // Forward cache for backward.
  std::array<Tensor, kNumLevels> enc_out_;  // f1..f5
  std::array<int, kNumLevels> dec_in_ch_{};
  bool have_forward_ = false;
};

// Per-level anchor vectors at the grid cell covering level-0 point (x, y).
std::array<Tensor, kNumLevels> extract_anchor(const CascadeEmbeddings& emb, double x, double y);

// Loads any "enc.*"-prefixed tensors from a checkpoint into matching
// parameters (pretrained-encoder consumption path).
int load_matching_params(const nn::ParamMap& params, const std::map<std::string, Tensor>& tensors);

}  // namespace cc2d
