#pragma once
// Overlay figures: predictions in green, ground truth in red, a yellow line
// joining each pair so the residual is visible at a glance.

#include <opencv2/core.hpp>
#include <optional>
#include <string>

#include "cc2d/geometry.hpp"

namespace cc2d {

cv::Mat3b render_overlay(const cv::Mat1f& image_original, const LandmarkSet& predictions,
                         const std::optional<LandmarkSet>& ground_truth = std::nullopt);

void save_overlay(const std::string& path, const cv::Mat1f& image_original,
                  const LandmarkSet& predictions,
                  const std::optional<LandmarkSet>& ground_truth = std::nullopt);

}  // namespace cc2d
