#pragma once
// Stage-II multi-task detector: binary-disc heatmaps plus offset maps,
// trained on pseudo-labels and decoded by majority vote.

#include <cmath>
#include <functional>
#include <memory>
#include <opencv2/core.hpp>

#include "cc2d/dataset.hpp"
#include "cc2d/encoder.hpp"

namespace cc2d {

struct HeatmapOffsetMaps {
  Tensor heat;   // K x H x W, probabilities in [0, 1] (binary for ground truth)
  Tensor off_x;  // K x H x W, units of sigma
  Tensor off_y;
  int k() const { return heat.c; }
};

// Exact disc rasterization over integer pixel centers; offsets are defined on
// every pixel and masked to the disc by the loss.
HeatmapOffsetMaps build_targets(const LandmarkSet& lms_network, double sigma, int size);

// Per landmark: pixel-mean binary cross-entropy on the heatmap (computed on
// logits) plus the disc-masked mean L1 of both offset maps. Total is the sum
// over landmarks. Templated so tests can run the identical code in double.
template <typename T>
T tpl_loss_single(const T* heat_logit, const T* gt_heat, const T* off_x, const T* gt_off_x,
                  const T* off_y, const T* gt_off_y, int n, T* g_heat_logit = nullptr,
                  T* g_off_x = nullptr, T* g_off_y = nullptr) {
  T bce = 0;
  for (int i = 0; i < n; ++i) {
    const T z = heat_logit[i], t = gt_heat[i];
    const T az = z < 0 ? -z : z;
    bce += (z > 0 ? z : T(0)) - z * t + std::log1p(std::exp(-az));
    if (g_heat_logit) g_heat_logit[i] = (T(1) / (T(1) + std::exp(-z)) - t) / n;
  }
  bce /= n;
  T mask_count = 0;
  for (int i = 0; i < n; ++i) mask_count += gt_heat[i] > 0 ? T(1) : T(0);
  const T denom = mask_count > 0 ? mask_count : T(1);
  T l1 = 0;
  for (int i = 0; i < n; ++i) {
    if (!(gt_heat[i] > 0)) {
      if (g_off_x) g_off_x[i] = 0;
      if (g_off_y) g_off_y[i] = 0;
      continue;
    }
    const T dx = off_x[i] - gt_off_x[i];
    const T dy = off_y[i] - gt_off_y[i];
    l1 += (dx < 0 ? -dx : dx) + (dy < 0 ? -dy : dy);
    if (g_off_x) g_off_x[i] = (dx > 0 ? T(1) : (dx < 0 ? T(-1) : T(0))) / denom;
    if (g_off_y) g_off_y[i] = (dy > 0 ? T(1) : (dy < 0 ? T(-1) : T(0))) / denom;
  }
  return bce + l1 / denom;
}

// Sum over landmarks; pred.heat holds logits here (training-internal form).
double tpl_loss_logits(const HeatmapOffsetMaps& pred_logits, const HeatmapOffsetMaps& gt,
                       HeatmapOffsetMaps* grad = nullptr);

// Spec-facing form on probabilities (converts back to logits internally).
double tpl_loss(const HeatmapOffsetMaps& pred_probs, const HeatmapOffsetMaps& gt);

struct DecodeResult {
  LandmarkSet original;  // ORIGINAL frame
  LandmarkSet network;
  std::vector<int> votes;      // winning tally per landmark (0 => argmax fallback)
};

// Majority vote: every pixel with heat >= 0.5 votes at its offset-corrected
// integer position; ties break to the smallest row-major index; no voter at
// all falls back to the heatmap argmax.
DecodeResult decode(const HeatmapOffsetMaps& pred, double sigma, const ImageGeometry& geom);

class MultiTaskUNet {
 public:
  MultiTaskUNet(const TplConfig& cfg, int num_landmarks, std::mt19937& rng);

  // Returns raw maps: K heat logits, K x-offsets, K y-offsets.
  Tensor forward(const Tensor& image);
  void backward(const Tensor& grad_out);
  void params(nn::ParamMap& out, const std::string& prefix);

  HeatmapOffsetMaps predict(const Tensor& image);  // sigmoid applied to heat

 private:
  TplConfig cfg_;
  int k_;
  detail::ConvBlock stem_;
  std::vector<detail::ConvBlock> enc_;
  std::vector<nn::MaxPool2> pools_;
  std::vector<detail::ConvBlock> dec_;
  std::vector<nn::Upsample2x> ups_;
  nn::Conv2d out_conv_;
  std::array<Tensor, kNumLevels> enc_out_;
  Tensor stem_out_;
  std::vector<int> dec_up_ch_;
};

struct TplModel {
  RunConfig config;
  int num_landmarks = 0;
  std::shared_ptr<MultiTaskUNet> net;
  int epochs_done = 0;
  int64_t steps_done = 0;

  static TplModel create(const RunConfig& cfg, int num_landmarks);
  static TplModel load(const std::string& checkpoint_path);
  void save(const std::string& checkpoint_path) const;
  nn::ParamMap all_params() const;
};

struct TplLogRow {
  int64_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

class TplTrainer {
 public:
  TplTrainer(TplModel model, const std::vector<PseudoLabelRecord>& labels,
             const DatasetManifest& train_set);

  void run(int64_t max_steps = 0);
  TplLogRow step();
  const std::vector<TplLogRow>& log() const { return log_; }
  TplModel& model() { return model_; }
  void set_log_sink(std::function<void(const TplLogRow&)> sink) { sink_ = std::move(sink); }

 private:
  TplModel model_;
  std::vector<Tensor> inputs_;
  std::vector<HeatmapOffsetMaps> targets_;
  std::vector<int> order_;
  size_t cursor_ = 0;
  std::mt19937 rng_;
  std::unique_ptr<nn::Adam> opt_;
  std::vector<TplLogRow> log_;
  std::function<void(const TplLogRow&)> sink_;
  int64_t steps_per_epoch_ = 0;
};

// Runs the detector on one original-resolution image.
DecodeResult detect_landmarks(const TplModel& model, const cv::Mat1f& image_original,
                              const ImageGeometry& geom);

}  // namespace cc2d
