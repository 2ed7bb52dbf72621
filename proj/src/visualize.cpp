#include "cc2d/visualize.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace cc2d {
namespace {

// Marker size scales mildly with the image so overlays stay readable on both
// 512px synthetic images and 2400px radiographs.
int marker_radius(const cv::Mat& img) { return std::max(3, std::max(img.cols, img.rows) / 150); }

cv::Point to_point(const Landmark& lm) {
  return {static_cast<int>(std::lround(lm.x)), static_cast<int>(std::lround(lm.y))};
}

}  // namespace

cv::Mat3b render_overlay(const cv::Mat1f& image_original, const LandmarkSet& predictions,
                         const std::optional<LandmarkSet>& ground_truth) {
  predictions.validate();
  if (!predictions.landmarks.empty() && predictions.landmarks[0].frame != Frame::kOriginal)
    throw std::invalid_argument("render_overlay: predictions must be in the original frame");
  if (ground_truth) {
    ground_truth->validate();
    if (ground_truth->k() != predictions.k())
      throw std::invalid_argument("render_overlay: prediction/ground-truth K mismatch");
  }

  cv::Mat1b gray;
  image_original.convertTo(gray, CV_8U, 255.0);
  cv::Mat3b canvas;
  cv::cvtColor(gray, canvas, cv::COLOR_GRAY2BGR);
  const int r = marker_radius(canvas);
  const cv::Scalar green(0, 255, 0), red(0, 0, 255), yellow(0, 255, 255);

  for (int i = 0; i < predictions.k(); ++i) {
    const cv::Point p = to_point(predictions.landmarks[i]);
    if (ground_truth) {
      const cv::Point g = to_point(ground_truth->landmarks[i]);
      cv::line(canvas, p, g, yellow, 1, cv::LINE_AA);
      cv::circle(canvas, g, r, red, 1, cv::LINE_AA);
    }
    cv::circle(canvas, p, r, green, 1, cv::LINE_AA);
    cv::putText(canvas, std::to_string(i), p + cv::Point(r + 2, -r - 2), cv::FONT_HERSHEY_PLAIN,
                std::max(0.7, r / 4.0), green, 1, cv::LINE_AA);
  }
  return canvas;
}

void save_overlay(const std::string& path, const cv::Mat1f& image_original,
                  const LandmarkSet& predictions, const std::optional<LandmarkSet>& ground_truth) {
  const cv::Mat3b canvas = render_overlay(image_original, predictions, ground_truth);
  if (!cv::imwrite(path, canvas)) throw std::runtime_error("cannot write overlay: " + path);
}

}  // namespace cc2d
