#include "cc2d/geometry.hpp"

#include <cmath>

namespace cc2d {
namespace {

void check_inside(const Landmark& lm, const ImageGeometry& geom) {
  const int w = geom.width(lm.frame);
  const int h = geom.height(lm.frame);
  if (!(lm.x >= 0.0 && lm.x < w && lm.y >= 0.0 && lm.y < h))
    throw std::out_of_range("landmark " + std::to_string(lm.index) + " at (" +
                            std::to_string(lm.x) + ", " + std::to_string(lm.y) +
                            ") outside " + std::to_string(w) + "x" + std::to_string(h) + " frame");
}

}  // namespace

void ImageGeometry::validate() const {
  if (original_width <= 0 || original_height <= 0 || network_size <= 0)
    throw std::invalid_argument("image geometry: sizes must be positive");
  if (!(pixel_spacing_mm > 0.0) || !std::isfinite(pixel_spacing_mm))
    throw std::invalid_argument("image geometry: pixel spacing must be positive and finite");
}

void LandmarkSet::validate() const {
  geometry.validate();
  for (int i = 0; i < k(); ++i) {
    if (landmarks[i].index != i)
      throw std::invalid_argument("landmark set: indices must be exactly 0..K-1 in order");
    if (landmarks[i].frame != landmarks[0].frame)
      throw std::invalid_argument("landmark set: mixed coordinate frames");
    check_inside(landmarks[i], geometry);
  }
}

Landmark to_network_frame(const Landmark& lm, const ImageGeometry& geom) {
  if (lm.frame != Frame::kOriginal)
    throw std::invalid_argument("to_network_frame: landmark already in network frame");
  check_inside(lm, geom);
  return {lm.index, lm.x * geom.scale_x(), lm.y * geom.scale_y(), Frame::kNetwork};
}

Landmark from_network_frame(const Landmark& lm, const ImageGeometry& geom) {
  if (lm.frame != Frame::kNetwork)
    throw std::invalid_argument("from_network_frame: landmark not in network frame");
  check_inside(lm, geom);
  return {lm.index, lm.x / geom.scale_x(), lm.y / geom.scale_y(), Frame::kOriginal};
}

LandmarkSet to_network_frame(const LandmarkSet& set) {
  LandmarkSet out{set.geometry, {}};
  out.landmarks.reserve(set.landmarks.size());
  for (const auto& lm : set.landmarks) out.landmarks.push_back(to_network_frame(lm, set.geometry));
  return out;
}

LandmarkSet from_network_frame(const LandmarkSet& set) {
  LandmarkSet out{set.geometry, {}};
  out.landmarks.reserve(set.landmarks.size());
  for (const auto& lm : set.landmarks) out.landmarks.push_back(from_network_frame(lm, set.geometry));
  return out;
}

std::pair<int, int> downsample_coord(double x, double y, int level) {
  if (level < 1 || level > kNumLevels)
    throw std::invalid_argument("downsample_coord: level must be in 1..5");
  if (x < 0.0 || y < 0.0)
    throw std::out_of_range("downsample_coord: negative coordinate");
  const double f = static_cast<double>(1 << level);
  return {static_cast<int>(std::floor(x / f)), static_cast<int>(std::floor(y / f))};
}

int level_side(int full_side, int level) { return full_side >> level; }

}  // namespace cc2d
