#pragma once
// Coordinate frames and landmark containers.
//
// Convention used everywhere: x = column, y = row, origin at the top-left,
// pixel centers at integer coordinates. Coordinates stay sub-pixel until an
// integer grid index is actually needed.

#include <stdexcept>
#include <string>
#include <vector>

namespace cc2d {

enum class Frame { kOriginal, kNetwork };

struct ImageGeometry {
  int original_width = 0;
  int original_height = 0;
  double pixel_spacing_mm = 1.0;  // isotropic, per original pixel
  int network_size = 384;         // square working resolution

  void validate() const;
  double scale_x() const { return static_cast<double>(network_size) / original_width; }
  double scale_y() const { return static_cast<double>(network_size) / original_height; }
  int width(Frame f) const { return f == Frame::kOriginal ? original_width : network_size; }
  int height(Frame f) const { return f == Frame::kOriginal ? original_height : network_size; }

  bool operator==(const ImageGeometry&) const = default;
};

struct Landmark {
  int index = 0;
  double x = 0.0;
  double y = 0.0;
  Frame frame = Frame::kOriginal;
};

struct LandmarkSet {
  ImageGeometry geometry;
  std::vector<Landmark> landmarks;  // indices exactly 0..K-1, single frame

  int k() const { return static_cast<int>(landmarks.size()); }
  void validate() const;
};

// Axis-wise rescaling between the original and network frames. Inputs are
// bounds-checked against the source frame.
Landmark to_network_frame(const Landmark& lm, const ImageGeometry& geom);
Landmark from_network_frame(const Landmark& lm, const ImageGeometry& geom);

LandmarkSet to_network_frame(const LandmarkSet& set);
LandmarkSet from_network_frame(const LandmarkSet& set);

// (x, y) -> (floor(x / 2^level), floor(y / 2^level)); level in 1..5.
std::pair<int, int> downsample_coord(double x, double y, int level);

// Grid side at a stride level: side / 2^level.
int level_side(int full_side, int level);

inline constexpr int kNumLevels = 5;

}  // namespace cc2d
