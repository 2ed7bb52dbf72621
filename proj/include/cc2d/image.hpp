#pragma once
// Grayscale image plumbing on top of OpenCV: load/save, resize to the network
// frame, and conversion to the 3-channel normalized tensor the encoders eat.

#include <opencv2/core.hpp>
#include <string>

#include "cc2d/geometry.hpp"
#include "cc2d/tensor.hpp"

namespace cc2d {

// Loads any 8/16-bit image as single-channel float in [0, 1].
cv::Mat1f load_gray(const std::string& path);
void save_gray(const cv::Mat1f& img, const std::string& path);

cv::Mat1f resize_to_network(const cv::Mat1f& img, const ImageGeometry& geom);

// Replicates the single channel to three and normalizes (x - mean) / stddev.
Tensor to_input_tensor(const cv::Mat1f& img, float mean = 0.5f, float stddev = 0.5f);

// Axis-aligned crop fully inside the image; caller guarantees bounds.
cv::Mat1f crop(const cv::Mat1f& img, int x0, int y0, int side);

// Bilinear resize of a single-plane tensor map to out_h x out_w (inference path).
Tensor resize_map_bilinear(const Tensor& map, int out_h, int out_w);

}  // namespace cc2d
