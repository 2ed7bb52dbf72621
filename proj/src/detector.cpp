#include "cc2d/detector.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cc2d/checkpoint.hpp"
#include "cc2d/image.hpp"

namespace cc2d {

HeatmapOffsetMaps build_targets(const LandmarkSet& lms_network, double sigma, int size) {
  const int k = lms_network.k();
  HeatmapOffsetMaps maps;
  maps.heat = Tensor(k, size, size);
  maps.off_x = Tensor(k, size, size);
  maps.off_y = Tensor(k, size, size);
  const double s2 = sigma * sigma;
  for (int ki = 0; ki < k; ++ki) {
    const auto& lm = lms_network.landmarks[ki];
    float* heat = maps.heat.chan(ki);
    float* ox = maps.off_x.chan(ki);
    float* oy = maps.off_y.chan(ki);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dx = x - lm.x, dy = y - lm.y;
        const int i = y * size + x;
        heat[i] = (dx * dx + dy * dy <= s2) ? 1.f : 0.f;
        ox[i] = static_cast<float>(dx / sigma);
        oy[i] = static_cast<float>(dy / sigma);
      }
    }
  }
  return maps;
}

double tpl_loss_logits(const HeatmapOffsetMaps& pred, const HeatmapOffsetMaps& gt,
                       HeatmapOffsetMaps* grad) {
  if (!pred.heat.same_shape(gt.heat) || !pred.off_x.same_shape(gt.off_x) ||
      !pred.off_y.same_shape(gt.off_y))
    throw std::invalid_argument("tpl_loss: shape mismatch");
  const int n = pred.heat.plane();
  if (grad) {
    grad->heat = Tensor(pred.heat.c, pred.heat.h, pred.heat.w);
    grad->off_x = Tensor(pred.heat.c, pred.heat.h, pred.heat.w);
    grad->off_y = Tensor(pred.heat.c, pred.heat.h, pred.heat.w);
  }
  double total = 0.0;
  for (int k = 0; k < pred.k(); ++k) {
    total += tpl_loss_single<float>(
        pred.heat.chan(k), gt.heat.chan(k), pred.off_x.chan(k), gt.off_x.chan(k),
        pred.off_y.chan(k), gt.off_y.chan(k), n, grad ? grad->heat.chan(k) : nullptr,
        grad ? grad->off_x.chan(k) : nullptr, grad ? grad->off_y.chan(k) : nullptr);
  }
  return total;
}

double tpl_loss(const HeatmapOffsetMaps& pred_probs, const HeatmapOffsetMaps& gt) {
  HeatmapOffsetMaps logits = pred_probs;
  for (auto& p : logits.heat.v) {
    const float q = std::clamp(p, 1e-7f, 1.f - 1e-7f);
    p = std::log(q / (1.f - q));
  }
  return tpl_loss_logits(logits, gt, nullptr);
}

DecodeResult decode(const HeatmapOffsetMaps& pred, double sigma, const ImageGeometry& geom) {
  const int size = pred.heat.h;
  DecodeResult res;
  res.network.geometry = geom;
  for (int k = 0; k < pred.k(); ++k) {
    const float* heat = pred.heat.chan(k);
    const float* ox = pred.off_x.chan(k);
    const float* oy = pred.off_y.chan(k);
    // Votes come from pixels at or above half the channel peak. On binary
    // targets (peak 1) that is the usual 0.5 cut; on under-confident maps it
    // still lets the disc around the peak vote with its offsets.
    float peak = 0.f;
    for (int i = 0; i < size * size; ++i) peak = std::max(peak, heat[i]);
    const float thr = std::max(0.5f * peak, 1e-6f);
    std::unordered_map<int, int> tally;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int i = y * size + x;
        if (heat[i] < thr) continue;
        const int vx = std::clamp(static_cast<int>(std::lround(x - sigma * ox[i])), 0, size - 1);
        const int vy = std::clamp(static_cast<int>(std::lround(y - sigma * oy[i])), 0, size - 1);
        ++tally[vy * size + vx];
      }
    }
    int win_idx = -1, win_votes = 0;
    for (const auto& [pos, votes] : tally) {
      if (votes > win_votes || (votes == win_votes && pos < win_idx)) {
        win_idx = pos;
        win_votes = votes;
      }
    }
    if (win_idx < 0) {
      // No pixel cleared the threshold: fall back to the heatmap argmax.
      int best = 0;
      for (int i = 1; i < size * size; ++i)
        if (heat[i] > heat[best]) best = i;
      win_idx = best;
      win_votes = 0;
    }
    res.network.landmarks.push_back({k, static_cast<double>(win_idx % size),
                                     static_cast<double>(win_idx / size), Frame::kNetwork});
    res.votes.push_back(win_votes);
  }
  res.original = from_network_frame(res.network);
  return res;
}

// ---------------------------------------------------------------------------
// Multi-task U-Net
// ---------------------------------------------------------------------------

MultiTaskUNet::MultiTaskUNet(const TplConfig& cfg, int num_landmarks, std::mt19937& rng)
    : cfg_(cfg),
      k_(num_landmarks),
      stem_(3, cfg.channels[0], cfg.convs_per_block),
      out_conv_(cfg.decoder_channels[4], 3 * num_landmarks, 1) {
  cfg.validate();
  pools_.resize(kNumLevels);
  ups_.resize(kNumLevels);
  for (int b = 0; b < kNumLevels; ++b)
    enc_.emplace_back(cfg.channels[b], cfg.channels[b + 1], cfg.convs_per_block);
  // Decoder stages from /16 back to /1; skip channels shrink alongside.
  int prev = cfg.channels[5];
  for (int d = 0; d < kNumLevels; ++d) {
    const int skip_ch = cfg.channels[4 - d];
    dec_.emplace_back(prev + skip_ch, cfg.decoder_channels[d], cfg.convs_per_block);
    dec_up_ch_.push_back(prev);
    prev = cfg.decoder_channels[d];
  }
  std::mt19937& r = rng;
  stem_.init(r, 0.f);
  for (auto& b : enc_) b.init(r, 0.f);
  for (auto& d : dec_) d.init(r, 0.f);
  out_conv_.init(r, 0.02f);
  // Disc pixels are a tiny fraction of the map; start the heatmap logits at a
  // matching negative prior so early training is not spent zeroing everything.
  {
    nn::ParamMap out;
    out_conv_.params(out, "o");
    Tensor& bias = out.at("o.b")->val;
    for (int ki = 0; ki < k_; ++ki) bias.v[ki] = -4.f;
  }
}

Tensor MultiTaskUNet::forward(const Tensor& image) {
  if (image.h != image.w || image.h % 32 != 0)
    throw std::invalid_argument("detector: input side must be square and divisible by 32");
  stem_out_ = stem_.forward(image);
  Tensor cur = stem_out_;
  for (int b = 0; b < kNumLevels; ++b) {
    cur = enc_[b].forward(pools_[b].forward(cur));
    enc_out_[b] = cur;
  }
  Tensor g = enc_out_[4];
  for (int d = 0; d < kNumLevels; ++d) {
    const Tensor& skip = d < 4 ? enc_out_[3 - d] : stem_out_;
    g = dec_[d].forward(nn::concat(ups_[d].forward(g), skip));
  }
  return out_conv_.forward(g);
}

void MultiTaskUNet::backward(const Tensor& grad_out) {
  Tensor g = out_conv_.backward(grad_out);
  std::array<Tensor, kNumLevels> skip_grad;
  Tensor stem_skip_grad;
  for (int d = kNumLevels - 1; d >= 0; --d) {
    Tensor gcat = dec_[d].backward(g);
    auto [gup, gskip] = nn::split(gcat, dec_up_ch_[d], gcat.c - dec_up_ch_[d]);
    if (d < 4)
      skip_grad[3 - d] = std::move(gskip);
    else
      stem_skip_grad = std::move(gskip);
    g = ups_[d].backward(gup);
  }
  // g now holds the gradient w.r.t. f5.
  for (int b = kNumLevels - 1; b >= 0; --b) {
    Tensor gprev = pools_[b].backward(enc_[b].backward(g));
    if (b >= 1) {
      for (size_t i = 0; i < gprev.v.size(); ++i) gprev.v[i] += skip_grad[b - 1].v[i];
      g = std::move(gprev);
    } else {
      for (size_t i = 0; i < gprev.v.size(); ++i) gprev.v[i] += stem_skip_grad.v[i];
      stem_.backward(gprev);
    }
  }
}

void MultiTaskUNet::params(nn::ParamMap& out, const std::string& prefix) {
  stem_.params(out, prefix + ".enc.stem");
  for (int b = 0; b < kNumLevels; ++b) enc_[b].params(out, prefix + ".enc.stage" + std::to_string(b + 1));
  for (int d = 0; d < kNumLevels; ++d) dec_[d].params(out, prefix + ".dec." + std::to_string(d));
  out_conv_.params(out, prefix + ".out");
}

HeatmapOffsetMaps MultiTaskUNet::predict(const Tensor& image) {
  const Tensor raw = forward(image);
  HeatmapOffsetMaps maps;
  maps.heat = Tensor(k_, raw.h, raw.w);
  maps.off_x = Tensor(k_, raw.h, raw.w);
  maps.off_y = Tensor(k_, raw.h, raw.w);
  const size_t plane = raw.plane();
  for (int k = 0; k < k_; ++k) {
    const float* h = raw.chan(k);
    float* dst = maps.heat.chan(k);
    for (size_t i = 0; i < plane; ++i) dst[i] = 1.f / (1.f + std::exp(-h[i]));
    std::copy(raw.chan(k_ + k), raw.chan(k_ + k) + plane, maps.off_x.chan(k));
    std::copy(raw.chan(2 * k_ + k), raw.chan(2 * k_ + k) + plane, maps.off_y.chan(k));
  }
  return maps;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TplModel TplModel::create(const RunConfig& cfg, int num_landmarks) {
  cfg.validate();
  if (num_landmarks < 1) throw std::invalid_argument("tpl: need at least one landmark");
  TplModel m;
  m.config = cfg;
  m.num_landmarks = num_landmarks;
  std::mt19937 rng(static_cast<uint32_t>(cfg.seed) * 69069u + 5u);
  m.net = std::make_shared<MultiTaskUNet>(cfg.tpl, num_landmarks, rng);
  if (!cfg.tpl.pretrained_encoder.empty()) {
    const Checkpoint pre = load_checkpoint(cfg.tpl.pretrained_encoder);
    // Stage-I checkpoints store the full-image extractor under its own prefix;
    // remap its encoder weights onto ours so they can warm-start the detector.
    std::map<std::string, Tensor> tensors = pre.tensors;
    for (const auto& [name, t] : pre.tensors)
      if (name.rfind("er.", 0) == 0) tensors["tpl." + name.substr(3)] = t;
    nn::ParamMap params = m.all_params();
    if (load_matching_params(params, tensors) == 0)
      throw std::runtime_error("tpl pretrained encoder: no matching parameters");
  }
  return m;
}

nn::ParamMap TplModel::all_params() const {
  nn::ParamMap params;
  net->params(params, "tpl");
  return params;
}

void TplModel::save(const std::string& path) const {
  Checkpoint ckpt;
  ckpt.meta = nlohmann::json{{"kind", "tpl"},
                             {"config", to_json(config)},
                             {"num_landmarks", num_landmarks},
                             {"epochs_done", epochs_done},
                             {"steps_done", steps_done}};
  for (const auto& [name, p] : all_params()) ckpt.tensors[name] = p->val;
  save_checkpoint(ckpt, path);
}

TplModel TplModel::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "tpl")
    throw std::runtime_error("checkpoint " + path + " is not a tpl checkpoint");
  TplModel m = create(config_from_json(ckpt.meta.at("config")), ckpt.meta.at("num_landmarks").get<int>());
  m.epochs_done = ckpt.meta.value("epochs_done", 0);
  m.steps_done = ckpt.meta.value("steps_done", static_cast<int64_t>(0));
  nn::ParamMap params = m.all_params();
  for (auto& [name, p] : params) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end())
      throw std::runtime_error("checkpoint " + path + " is missing parameter " + name);
    p->val = it->second;
  }
  return m;
}

TplTrainer::TplTrainer(TplModel model, const std::vector<PseudoLabelRecord>& labels,
                       const DatasetManifest& train_set)
    : model_(std::move(model)),
      rng_(static_cast<uint32_t>(model_.config.seed) * 22695477u + 3u) {
  if (labels.empty()) throw std::invalid_argument("tpl training: empty pseudo-label set");
  const int net = model_.config.network_size;
  for (const auto& rec : labels) {
    if (rec.landmarks.k() != model_.num_landmarks)
      throw std::invalid_argument("tpl training: pseudo-label K mismatch for " + rec.image_id);
    const auto& entry = train_set.find(rec.image_id);
    ImageGeometry geom = rec.landmarks.geometry;
    geom.network_size = net;
    cv::Mat1f img = resize_to_network(load_gray(entry.image_path), geom);
    inputs_.push_back(to_input_tensor(img, model_.config.input_mean, model_.config.input_std));
    LandmarkSet net_lms = to_network_frame(LandmarkSet{geom, rec.landmarks.landmarks});
    targets_.push_back(build_targets(net_lms, model_.config.tpl.sigma, net));
  }
  order_.resize(inputs_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  std::shuffle(order_.begin(), order_.end(), rng_);
  steps_per_epoch_ = (static_cast<int64_t>(inputs_.size()) + model_.config.tpl.batch_size - 1) /
                     model_.config.tpl.batch_size;
  opt_ = std::make_unique<nn::Adam>(model_.all_params());
}

TplLogRow TplTrainer::step() {
  const auto& cfg = model_.config.tpl;
  const int k = model_.num_landmarks;
  opt_->zero_grad();
  double loss_sum = 0.0;
  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(inputs_.size()));
  const float inv_batch = 1.f / batch;

  for (int b = 0; b < batch; ++b) {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const int idx = order_[cursor_++];
    const Tensor raw = model_.net->forward(inputs_[idx]);

    HeatmapOffsetMaps pred;
    pred.heat = Tensor(k, raw.h, raw.w);
    pred.off_x = Tensor(k, raw.h, raw.w);
    pred.off_y = Tensor(k, raw.h, raw.w);
    const size_t plane = raw.plane();
    for (int ki = 0; ki < k; ++ki) {
      std::copy(raw.chan(ki), raw.chan(ki) + plane, pred.heat.chan(ki));
      std::copy(raw.chan(k + ki), raw.chan(k + ki) + plane, pred.off_x.chan(ki));
      std::copy(raw.chan(2 * k + ki), raw.chan(2 * k + ki) + plane, pred.off_y.chan(ki));
    }
    HeatmapOffsetMaps grad;
    loss_sum += tpl_loss_logits(pred, targets_[idx], &grad);

    Tensor gout(raw.c, raw.h, raw.w);
    for (int ki = 0; ki < k; ++ki) {
      const float* gh = grad.heat.chan(ki);
      const float* gx = grad.off_x.chan(ki);
      const float* gy = grad.off_y.chan(ki);
      float* oh = gout.chan(ki);
      float* ox = gout.chan(k + ki);
      float* oy = gout.chan(2 * k + ki);
      for (size_t i = 0; i < plane; ++i) {
        oh[i] = gh[i] * inv_batch;
        ox[i] = gx[i] * inv_batch;
        oy[i] = gy[i] * inv_batch;
      }
    }
    model_.net->backward(gout);
  }

  const double lr =
      cfg.lr_halve_every > 0
          ? cfg.lr * std::pow(0.5, model_.epochs_done / cfg.lr_halve_every)
          : cfg.lr;
  opt_->step(static_cast<float>(lr));
  ++model_.steps_done;
  if (model_.steps_done % steps_per_epoch_ == 0) ++model_.epochs_done;
  TplLogRow row{model_.steps_done, model_.epochs_done, loss_sum / batch, lr};
  log_.push_back(row);
  if (sink_) sink_(row);
  return row;
}

void TplTrainer::run(int64_t max_steps) {
  int64_t target = steps_per_epoch_ * model_.config.tpl.epochs;
  if (max_steps > 0) target = std::min(target, max_steps);
  while (model_.steps_done < target) step();
}

DecodeResult detect_landmarks(const TplModel& model, const cv::Mat1f& image_original,
                              const ImageGeometry& geom) {
  ImageGeometry g = geom;
  g.network_size = model.config.network_size;
  const cv::Mat1f net_img = resize_to_network(image_original, g);
  const HeatmapOffsetMaps pred =
      model.net->predict(to_input_tensor(net_img, model.config.input_mean, model.config.input_std));
  return decode(pred, model.config.tpl.sigma, g);
}

}  // namespace cc2d
