#pragma once
// Stage-I patch sampling and augmentation, with exact coordinate tracking of
// the target point through every transform.

#include <opencv2/core.hpp>
#include <random>

#include "cc2d/config.hpp"

namespace cc2d {

struct PatchSample {
  cv::Mat1f patch;             // patch_size x patch_size, values in [0, 1]
  cv::Point2d patch_origin;    // network frame
  cv::Point2d target_in_patch;
  cv::Point2d target_in_image;  // network frame, unchanged by augmentation
  bool margin_degraded = false;  // target was too close to a border for the full margin
};

// Patch origin is uniform over all positions that keep the target at least
// margin_px inside the patch and the patch inside the image. When no such
// origin exists the margin shrinks to the best feasible value (never fails).
PatchSample sample_patch(const cv::Mat1f& image, cv::Point2d target, int patch_size, int margin_px,
                         std::mt19937& rng);

// In-plane rotation about the patch center plus brightness/contrast jitter.
// If the rotated target would leave the margin, the angle is resampled (up to
// 10 tries) and finally forced to zero.
PatchSample augment_patch(const PatchSample& sample, const SslConfig& cfg, std::mt19937& rng);

// The exact coordinate map used for the rotation, exposed for verification.
cv::Point2d rotate_about_center(cv::Point2d p, double angle_deg, int side);

}  // namespace cc2d
