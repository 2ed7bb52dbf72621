#include "cc2d/ssl_infer.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>

#include "cc2d/image.hpp"
#include "cc2d/ssl.hpp"

namespace cc2d {

TemplateBank build_template_bank(const SslModel& model, const cv::Mat1f& template_image_original,
                                 const LandmarkSet& template_landmarks) {
  template_landmarks.validate();
  if (!template_landmarks.landmarks.empty() &&
      template_landmarks.landmarks[0].frame != Frame::kOriginal)
    throw std::invalid_argument("template landmarks must be in the original frame");

  ImageGeometry geom = template_landmarks.geometry;
  geom.network_size = model.config.network_size;
  const cv::Mat1f net_img = resize_to_network(template_image_original, geom);
  const int patch = model.config.ssl.patch_size;
  const int net = geom.network_size;

  TemplateBank bank;
  bank.geometry = geom;
  for (const auto& lm : template_landmarks.landmarks) {
    const Landmark nl = to_network_frame(lm, geom);
    // Center the window on the landmark, clamped to stay inside the image.
    const int ox = std::clamp(static_cast<int>(std::lround(nl.x)) - patch / 2, 0, net - patch);
    const int oy = std::clamp(static_cast<int>(std::lround(nl.y)) - patch / 2, 0, net - patch);
    const cv::Mat1f window = crop(net_img, ox, oy, patch);
    const Tensor xp = to_input_tensor(window, model.config.input_mean, model.config.input_std);
    const CascadeEmbeddings emb = model.patch_encoder->extract(xp, EmbedSource::kPatch);
    TemplateBankEntry entry;
    entry.anchors = extract_anchor(emb, nl.x - ox, nl.y - oy);
    entry.landmark_network = nl;
    bank.entries.push_back(std::move(entry));
  }
  return bank;
}

CascadeEmbeddings embed_query(const SslModel& model, const cv::Mat1f& image_original,
                              const ImageGeometry& geom) {
  ImageGeometry g = geom;
  g.network_size = model.config.network_size;
  const cv::Mat1f net_img = resize_to_network(image_original, g);
  return model.query_encoder->extract(
      to_input_tensor(net_img, model.config.input_mean, model.config.input_std), EmbedSource::kQuery);
}

LocalizationResult fuse_and_localize(const SslModel& model, const CascadeEmbeddings& query_emb,
                                     const TemplateBankEntry& entry,
                                     const std::vector<int>& levels_enabled,
                                     SimilarityPyramid* pyramid_out) {
  const int net = model.config.network_size;
  Tensor fused(1, net, net);
  std::fill(fused.v.begin(), fused.v.end(), 1.f);

  for (int level : levels_enabled) {
    Tensor sim = cosine_similarity_map(entry.anchors[level - 1], query_emb.levels[level - 1]);
    for (auto& v : sim.v) v = std::max(v, 0.f);  // clip to [0, 1]; cosine is already <= 1
    Tensor up = resize_map_bilinear(sim, net, net);
    for (size_t i = 0; i < fused.v.size(); ++i) fused.v[i] *= up.v[i];
    if (pyramid_out) pyramid_out->levels[level - 1] = std::move(sim);
  }

  // Row-major argmax; strict > keeps the first position on ties.
  int best = 0;
  float best_v = fused.v[0];
  for (size_t i = 1; i < fused.v.size(); ++i)
    if (fused.v[i] > best_v) {
      best_v = fused.v[i];
      best = static_cast<int>(i);
    }
  LocalizationResult res;
  res.landmark_network = {entry.landmark_network.index, static_cast<double>(best % net),
                          static_cast<double>(best / net), Frame::kNetwork};
  res.confidence = std::clamp(static_cast<double>(best_v), 0.0, 1.0);
  if (pyramid_out) pyramid_out->fused = std::move(fused);
  return res;
}

namespace {

void dump_pyramid(const SimilarityPyramid& pyr, const std::string& dir, const std::string& image_id,
                  int landmark_index) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_map = [&](const Tensor& t, const std::string& tag) {
    if (t.size() == 0) return;
    cv::Mat1f m(t.h, t.w, const_cast<float*>(t.data()));
    cv::Mat1f norm;
    double mn, mx;
    cv::minMaxLoc(m, &mn, &mx);
    m.convertTo(norm, CV_32F, mx > mn ? 1.0 / (mx - mn) : 1.0, mx > mn ? -mn / (mx - mn) : 0.0);
    save_gray(norm, dir + "/" + image_id + "_lm" + std::to_string(landmark_index) + "_" + tag + ".png");
  };
  for (int level = 1; level <= kNumLevels; ++level)
    write_map(pyr.levels[level - 1], "level" + std::to_string(level));
  write_map(pyr.fused, "fused");
}

}  // namespace

std::vector<PseudoLabelRecord> generate_pseudo_labels(const SslModel& model,
                                                      const DatasetManifest& train_set,
                                                      const std::string& template_id,
                                                      const PseudoLabelOptions& opts) {
  const ManifestEntry& template_entry = train_set.find(template_id);
  const LandmarkSet template_gt = load_ground_truth(train_set, template_entry);
  const cv::Mat1f template_img = load_gray(template_entry.image_path);
  const TemplateBank bank = build_template_bank(model, template_img, template_gt);
  const ImageGeometry geom = bank.geometry;

  std::vector<PseudoLabelRecord> records;
  for (const auto& entry : train_set.entries) {
    if (entry.image_id == template_id) {
      // The one image whose truth is known keeps it.
      PseudoLabelRecord rec;
      rec.image_id = entry.image_id;
      rec.landmarks = template_gt;
      rec.landmarks.geometry = geom;
      rec.confidences.assign(template_gt.k(), 1.0);
      rec.source = LabelSource::kGroundTruth;
      records.push_back(std::move(rec));
      continue;
    }
    try {
      const cv::Mat1f img = load_gray(entry.image_path);
      const CascadeEmbeddings emb = embed_query(model, img, geom);
      PseudoLabelRecord rec;
      rec.image_id = entry.image_id;
      rec.landmarks.geometry = geom;
      rec.source = LabelSource::kSsl;
      for (const auto& be : bank.entries) {
        SimilarityPyramid pyr;
        const bool want_dump = !opts.diagnostics_dir.empty();
        const LocalizationResult r = fuse_and_localize(model, emb, be, model.config.infer_levels,
                                                       want_dump ? &pyr : nullptr);
        rec.landmarks.landmarks.push_back(from_network_frame(r.landmark_network, geom));
        rec.confidences.push_back(r.confidence);
        if (want_dump) dump_pyramid(pyr, opts.diagnostics_dir, entry.image_id, be.landmark_network.index);
      }
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      if (!opts.skip_failed_images) throw;
      std::cerr << "pseudo-labels: skipping " << entry.image_id << ": " << e.what() << "\n";
    }
  }
  return records;
}

}  // namespace cc2d
