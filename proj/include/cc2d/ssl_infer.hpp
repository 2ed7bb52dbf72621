#pragma once
// Stage-I inference: anchor features from the annotated template, cascade
// similarity pyramids on query images, coarse-to-fine fusion, pseudo-labels.

#include <optional>

#include "cc2d/dataset.hpp"
#include "cc2d/ssl_train.hpp"

namespace cc2d {

struct TemplateBankEntry {
  std::array<Tensor, kNumLevels> anchors;
  Landmark landmark_network;  // template landmark, network frame
};

struct TemplateBank {
  std::vector<TemplateBankEntry> entries;  // exactly K
  ImageGeometry geometry;
};

struct SimilarityPyramid {
  std::array<Tensor, kNumLevels> levels;  // empty tensors for disabled levels
  Tensor fused;                           // network_size^2, values in [0, 1]
};

struct LocalizationResult {
  Landmark landmark_network;
  double confidence = 0.0;  // fused score at the argmax
};

// Crops a patch-size window centered on each template landmark (clamped at
// borders), embeds it with E_p, and reads the anchor vectors.
TemplateBank build_template_bank(const SslModel& model, const cv::Mat1f& template_image_original,
                                 const LandmarkSet& template_landmarks);

// Per level: cosine map, clip to [0, 1], bilinear upsample to the network
// frame; fused map is the elementwise product; argmax row-major on ties.
LocalizationResult fuse_and_localize(const SslModel& model, const CascadeEmbeddings& query_emb,
                                     const TemplateBankEntry& entry,
                                     const std::vector<int>& levels_enabled,
                                     SimilarityPyramid* pyramid_out = nullptr);

CascadeEmbeddings embed_query(const SslModel& model, const cv::Mat1f& image_original,
                              const ImageGeometry& geom);

struct PseudoLabelOptions {
  bool skip_failed_images = false;  // skip-and-log instead of propagating I/O errors
  std::string diagnostics_dir;      // when set, per-image level/fused map dumps
};

// One record per training image; the template's own record carries its ground
// truth (source GROUND_TRUTH), everything else comes from fusion (source SSL).
std::vector<PseudoLabelRecord> generate_pseudo_labels(const SslModel& model,
                                                      const DatasetManifest& train_set,
                                                      const std::string& template_id,
                                                      const PseudoLabelOptions& opts = {});

}  // namespace cc2d
