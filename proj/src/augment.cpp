#include "cc2d/augment.hpp"

#include <cmath>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace cc2d {
namespace {

// Inclusive integer interval, possibly collapsed.
struct Range {
  int lo, hi;
  bool empty() const { return lo > hi; }
};

Range feasible_origins(double t, int image_side, int patch_size, int margin) {
  // Keep the target margin-inside the patch: origin <= t - margin and
  // origin >= t - (patch_size - 1 - margin); clamp to the image.
  const int lo = std::max(0, static_cast<int>(std::ceil(t - (patch_size - 1 - margin))));
  const int hi = std::min(image_side - patch_size, static_cast<int>(std::floor(t - margin)));
  return {lo, hi};
}

}  // namespace

PatchSample sample_patch(const cv::Mat1f& image, cv::Point2d target, int patch_size, int margin_px,
                         std::mt19937& rng) {
  if (image.rows != image.cols) throw std::invalid_argument("sample_patch: image must be square");
  if (patch_size > image.rows) throw std::invalid_argument("sample_patch: patch larger than image");
  if (!(target.x >= 0 && target.x < image.cols && target.y >= 0 && target.y < image.rows))
    throw std::invalid_argument("sample_patch: target outside image");

  PatchSample s;
  int margin = margin_px;
  Range rx = feasible_origins(target.x, image.cols, patch_size, margin);
  Range ry = feasible_origins(target.y, image.rows, patch_size, margin);
  while ((rx.empty() || ry.empty()) && margin > 0) {
    --margin;
    rx = feasible_origins(target.x, image.cols, patch_size, margin);
    ry = feasible_origins(target.y, image.rows, patch_size, margin);
  }
  s.margin_degraded = margin != margin_px;
  if (rx.empty() || ry.empty()) {
    // Degenerate corner case: clamp the window to contain the target at all.
    rx = {std::clamp(static_cast<int>(target.x) - patch_size + 1, 0, image.cols - patch_size),
          std::clamp(static_cast<int>(target.x), 0, image.cols - patch_size)};
    ry = {std::clamp(static_cast<int>(target.y) - patch_size + 1, 0, image.rows - patch_size),
          std::clamp(static_cast<int>(target.y), 0, image.rows - patch_size)};
    s.margin_degraded = true;
  }
  std::uniform_int_distribution<int> dx(rx.lo, rx.hi), dy(ry.lo, ry.hi);
  const int ox = dx(rng), oy = dy(rng);
  s.patch = image(cv::Rect(ox, oy, patch_size, patch_size)).clone();
  s.patch_origin = {static_cast<double>(ox), static_cast<double>(oy)};
  s.target_in_image = target;
  s.target_in_patch = {target.x - ox, target.y - oy};
  return s;
}

cv::Point2d rotate_about_center(cv::Point2d p, double angle_deg, int side) {
  const double cx = (side - 1) * 0.5, cy = (side - 1) * 0.5;
  const double a = angle_deg * CV_PI / 180.0;
  const double dx = p.x - cx, dy = p.y - cy;
  // Image-coordinate rotation (y down) matching cv::getRotationMatrix2D.
  return {cx + std::cos(a) * dx + std::sin(a) * dy, cy - std::sin(a) * dx + std::cos(a) * dy};
}

PatchSample augment_patch(const PatchSample& sample, const SslConfig& cfg, std::mt19937& rng) {
  const int side = sample.patch.cols;
  std::uniform_real_distribution<double> uang(-cfg.rot_max_deg, cfg.rot_max_deg);

  double angle = 0.0;
  cv::Point2d rotated = sample.target_in_patch;
  if (cfg.rot_max_deg > 0.0) {
    const double m = cfg.patch_margin;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const double cand = uang(rng);
      const cv::Point2d rp = rotate_about_center(sample.target_in_patch, cand, side);
      if (rp.x >= m && rp.x <= side - 1 - m && rp.y >= m && rp.y <= side - 1 - m) {
        angle = cand;
        rotated = rp;
        break;
      }
    }
  }

  PatchSample out = sample;
  out.patch = sample.patch.clone();  // cv::Mat copies share pixels otherwise
  out.target_in_patch = rotated;
  if (angle != 0.0) {
    const cv::Point2f center((side - 1) * 0.5f, (side - 1) * 0.5f);
    const cv::Mat rot = cv::getRotationMatrix2D(center, angle, 1.0);
    cv::warpAffine(sample.patch, out.patch, rot, sample.patch.size(), cv::INTER_LINEAR,
                   cv::BORDER_REPLICATE);
  }

  if (cfg.brightness_jitter > 0.0 || cfg.contrast_jitter > 0.0) {
    std::uniform_real_distribution<double> ub(-cfg.brightness_jitter, cfg.brightness_jitter);
    std::uniform_real_distribution<double> uc(-cfg.contrast_jitter, cfg.contrast_jitter);
    const float b = static_cast<float>(ub(rng));
    const float c = static_cast<float>(1.0 + uc(rng));
    const float mean = static_cast<float>(cv::mean(out.patch)[0]);
    for (int y = 0; y < out.patch.rows; ++y) {
      float* row = out.patch.ptr<float>(y);
      for (int x = 0; x < out.patch.cols; ++x)
        row[x] = std::clamp((row[x] - mean) * c + mean + b, 0.f, 1.f);
    }
  }
  return out;
}

}  // namespace cc2d
