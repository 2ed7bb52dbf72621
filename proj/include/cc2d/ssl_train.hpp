#pragma once
// Stage-I training loop: patch sampling, augmentation, twin extraction,
// matrices of interest, and Adam descent on the summed cross-entropy loss.

#include <functional>
#include <memory>
#include <opencv2/core.hpp>
#include <string>

#include "cc2d/dataset.hpp"
#include "cc2d/encoder.hpp"

namespace cc2d {

struct SslLogRow {
  int64_t step = 0;
  int epoch = 0;
  std::vector<double> level_losses;  // one entry per enabled level, ascending level order
  double total = 0.0;
  double lr = 0.0;
};

// Both extractors plus everything needed to resume or run inference.
struct SslModel {
  RunConfig config;
  std::shared_ptr<CascadeEncoder> query_encoder;  // E_r
  std::shared_ptr<CascadeEncoder> patch_encoder;  // E_p; same object when weights are shared
  int epochs_done = 0;
  int64_t steps_done = 0;

  static SslModel create(const RunConfig& cfg);
  static SslModel load(const std::string& checkpoint_path);
  void save(const std::string& checkpoint_path) const;

  nn::ParamMap all_params() const;
};

class SslTrainer {
 public:
  SslTrainer(SslModel model, const DatasetManifest& train_set);

  // Runs for the configured number of epochs (one epoch = ceil(N / batch)
  // steps). max_steps > 0 caps the total step count for short runs.
  void run(int64_t max_steps = 0);

  const std::vector<SslLogRow>& log() const { return log_; }
  SslModel& model() { return model_; }
  double current_lr() const;
  void set_log_sink(std::function<void(const SslLogRow&)> sink) { sink_ = std::move(sink); }
  void set_checkpoint_path(std::string path) { ckpt_path_ = std::move(path); }

  // One optimization step over a fresh batch; returns the logged row.
  SslLogRow step();

 private:
  SslModel model_;
  ImageGeometry geom_;
  std::vector<cv::Mat1f> images_;   // resized to the network frame
  std::vector<Tensor> query_inputs_;  // normalized 3-channel tensors, cached
  std::mt19937 rng_;
  std::vector<SslLogRow> log_;
  std::function<void(const SslLogRow&)> sink_;
  std::string ckpt_path_;
  std::unique_ptr<nn::Adam> opt_;
  int64_t steps_per_epoch_ = 0;
};

}  // namespace cc2d
