#include "cc2d/encoder.hpp"

#include <stdexcept>

namespace cc2d {
namespace detail {

namespace {

Tensor concat_many(const std::vector<Tensor>& xs) {
  int c = 0;
  for (const auto& x : xs) c += x.c;
  Tensor y(c, xs[0].h, xs[0].w);
  auto it = y.v.begin();
  for (const auto& x : xs) it = std::copy(x.v.begin(), x.v.end(), it);
  return y;
}

std::vector<Tensor> split_many(const Tensor& g, const std::vector<int>& channels) {
  std::vector<Tensor> out;
  auto it = g.v.begin();
  for (int c : channels) {
    Tensor t(c, g.h, g.w);
    std::copy(it, it + t.v.size(), t.v.begin());
    it += t.v.size();
    out.push_back(std::move(t));
  }
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

ConvBlock::ConvBlock(int cin, int cout, int n_convs) {
  convs_.reserve(n_convs);
  relus_.resize(n_convs);
  for (int i = 0; i < n_convs; ++i) convs_.emplace_back(i == 0 ? cin : cout, cout, 3);
}

Tensor ConvBlock::forward(const Tensor& x) {
  Tensor y = x;
  for (size_t i = 0; i < convs_.size(); ++i) y = relus_[i].forward(convs_[i].forward(y));
  return y;
}

Tensor ConvBlock::backward(const Tensor& gy) {
  Tensor g = gy;
  for (size_t i = convs_.size(); i-- > 0;) g = convs_[i].backward(relus_[i].backward(g));
  return g;
}

void ConvBlock::init(std::mt19937& rng, float stddev) {
  for (auto& c : convs_) c.init(rng, stddev);
}

void ConvBlock::params(nn::ParamMap& out, const std::string& prefix) {
  for (size_t i = 0; i < convs_.size(); ++i) convs_[i].params(out, prefix + "." + std::to_string(i));
}

AsppHead::AsppHead(int cin, int cout, const std::vector<int>& dilations, int branch_channels)
    : project_(static_cast<int>(dilations.size()) *
                   (branch_channels > 0 ? branch_channels : std::max(cin / 4, 4)),
               cout, 1),
      branch_ch_(branch_channels > 0 ? branch_channels : std::max(cin / 4, 4)) {
  relus_.resize(dilations.size());
  for (int d : dilations) branches_.emplace_back(cin, branch_ch_, 3, d);
}

Tensor AsppHead::forward(const Tensor& x) {
  std::vector<Tensor> outs;
  outs.reserve(branches_.size());
  for (size_t i = 0; i < branches_.size(); ++i)
    outs.push_back(relus_[i].forward(branches_[i].forward(x)));
  return project_.forward(concat_many(outs));
}

Tensor AsppHead::backward(const Tensor& gy) {
  const Tensor gcat = project_.backward(gy);
  const std::vector<int> chans(branches_.size(), branch_ch_);
  const auto parts = split_many(gcat, chans);
  Tensor gx;
  for (size_t i = 0; i < branches_.size(); ++i) {
    Tensor g = branches_[i].backward(relus_[i].backward(parts[i]));
    if (gx.size() == 0)
      gx = std::move(g);
    else
      add_into(gx, g);
  }
  return gx;
}

void AsppHead::init(std::mt19937& rng, float stddev) {
  for (auto& b : branches_) b.init(rng, stddev);
  project_.init(rng, stddev);
}

void AsppHead::params(nn::ParamMap& out, const std::string& prefix) {
  for (size_t i = 0; i < branches_.size(); ++i)
    branches_[i].params(out, prefix + ".branch" + std::to_string(i));
  project_.params(out, prefix + ".project");
}

}  // namespace detail

CascadeEncoder::CascadeEncoder(const ExtractorConfig& cfg, std::mt19937& rng)
    : cfg_(cfg), stem_(3, cfg.channels[0], cfg.convs_per_block) {
  cfg.validate();
  pools_.resize(kNumLevels);
  for (int b = 0; b < kNumLevels; ++b)
    enc_.emplace_back(cfg.channels[b], cfg.channels[b + 1], cfg.convs_per_block);

  // Channel width of the decoder activation feeding the level-L head.
  auto gch = [&](int level) {
    return level == 5 ? cfg.channels[5] : cfg.decoder_channels[4 - level];
  };
  ups_.resize(4);
  for (int level = 4; level >= 1; --level)
    dec_.emplace_back(gch(level + 1) + cfg.channels[level], gch(level), cfg.convs_per_block);
  for (int level = 1; level <= kNumLevels; ++level)
    heads_.emplace_back(gch(level), cfg.embed_dim, cfg.aspp_dilations, cfg.aspp_branch_channels);

  stem_.init(rng, 0.f);
  for (auto& b : enc_) b.init(rng, 0.f);
  for (auto& d : dec_) d.init(rng, cfg.init_stddev);
  for (auto& h : heads_) h.init(rng, cfg.init_stddev);
}

CascadeEmbeddings CascadeEncoder::extract(const Tensor& image, EmbedSource source) {
  if (image.c != 3) throw std::invalid_argument("extract: expected a 3-channel input");
  if (image.h != image.w || image.h % 32 != 0)
    throw std::invalid_argument("extract: input side must be square and divisible by 32");

  Tensor d0 = stem_.forward(image);
  Tensor cur = d0;
  for (int b = 0; b < kNumLevels; ++b) {
    cur = enc_[b].forward(pools_[b].forward(cur));
    enc_out_[b] = cur;  // f_{b+1}
  }

  CascadeEmbeddings emb;
  emb.source = source;
  Tensor g = enc_out_[4];  // g5 = f5
  emb.levels[4] = heads_[4].forward(g);
  for (int level = 4; level >= 1; --level) {
    const int j = 4 - level;  // dec_/ups_ index
    Tensor up = ups_[j].forward(g);
    dec_in_ch_[level - 1] = up.c;
    g = dec_[j].forward(nn::concat(up, enc_out_[level - 1]));
    emb.levels[level - 1] = heads_[level - 1].forward(g);
  }
  have_forward_ = true;
  return emb;
}

void CascadeEncoder::backward(const std::array<Tensor, kNumLevels>& grad_levels) {
  if (!have_forward_) throw std::logic_error("encoder backward without a forward pass");

  // Walk the decoder from the finest level back to the bottleneck, collecting
  // skip gradients for the encoder stages on the way.
  std::array<Tensor, kNumLevels> skip_grad;  // grad wrt f_L from the skip path, L=1..4
  Tensor g_acc;                              // grad wrt g_L
  for (int level = 1; level <= kNumLevels; ++level) {
    Tensor head_g;
    if (grad_levels[level - 1].size() > 0) head_g = heads_[level - 1].backward(grad_levels[level - 1]);
    if (head_g.size() > 0) {
      if (g_acc.size() > 0) detail::add_into(head_g, g_acc);
      g_acc = std::move(head_g);
    }
    if (level == kNumLevels) break;
    // No gradient at or below this level: nothing to push through its block.
    if (g_acc.size() == 0) continue;
    const int j = 4 - level;
    Tensor gcat = dec_[j].backward(g_acc);
    auto [gup, gskip] = nn::split(gcat, dec_in_ch_[level - 1], gcat.c - dec_in_ch_[level - 1]);
    skip_grad[level - 1] = std::move(gskip);
    g_acc = ups_[j].backward(gup);
  }

  // Encoder chain: g_acc now holds the gradient w.r.t. f5.
  Tensor gx = std::move(g_acc);
  for (int b = kNumLevels - 1; b >= 0; --b) {
    if (gx.size() == 0) {
      if (b >= 1 && skip_grad[b - 1].size() > 0) gx = std::move(skip_grad[b - 1]);
      continue;
    }
    gx = pools_[b].backward(enc_[b].backward(gx));
    if (b >= 1 && skip_grad[b - 1].size() > 0) detail::add_into(gx, skip_grad[b - 1]);
  }
  if (gx.size() > 0) stem_.backward(gx);
}

void CascadeEncoder::params(nn::ParamMap& out, const std::string& prefix) {
  stem_.params(out, prefix + ".enc.stem");
  for (int b = 0; b < kNumLevels; ++b) enc_[b].params(out, prefix + ".enc.stage" + std::to_string(b + 1));
  for (size_t j = 0; j < dec_.size(); ++j)
    dec_[j].params(out, prefix + ".dec.level" + std::to_string(4 - static_cast<int>(j)));
  for (int level = 1; level <= kNumLevels; ++level)
    heads_[level - 1].params(out, prefix + ".head.level" + std::to_string(level));
}

std::array<Tensor, kNumLevels> extract_anchor(const CascadeEmbeddings& emb, double x, double y) {
  std::array<Tensor, kNumLevels> out;
  for (int level = 1; level <= kNumLevels; ++level) {
    const Tensor& map = emb.levels[level - 1];
    const auto [gx, gy] = downsample_coord(x, y, level);
    if (gx >= map.w || gy >= map.h)
      throw std::out_of_range("extract_anchor: point outside the level-" + std::to_string(level) + " grid");
    Tensor v = Tensor::vec(map.c);
    for (int c = 0; c < map.c; ++c) v.v[c] = map.at(c, gy, gx);
    out[level - 1] = std::move(v);
  }
  return out;
}

int load_matching_params(const nn::ParamMap& params, const std::map<std::string, Tensor>& tensors) {
  int loaded = 0;
  for (const auto& [name, t] : tensors) {
    auto it = params.find(name);
    if (it == params.end()) continue;
    if (!it->second->val.same_shape(t))
      throw std::runtime_error("pretrained weights: shape mismatch for " + name);
    it->second->val = t;
    ++loaded;
  }
  return loaded;
}

}  // namespace cc2d
