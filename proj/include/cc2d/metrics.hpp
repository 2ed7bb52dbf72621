#pragma once
// Evaluation: mean radial error in millimetres and successful detection rates
// at fixed thresholds.

#include <map>
#include <string>
#include <vector>

#include "cc2d/geometry.hpp"
#include "cc2d/vendor_json.hpp"

namespace cc2d {

// Euclidean distance in the original frame times the pixel spacing. Both
// landmarks must carry the same index and live in the original frame.
double radial_error_mm(const Landmark& pred, const Landmark& gt, const ImageGeometry& geom);

struct PerLandmarkStats {
  int index = 0;
  double mre_mm = 0.0;
  std::map<double, double> sdr;  // threshold mm -> fraction in [0, 1]
};

struct EvalReport {
  double mre_mm = 0.0;
  std::map<double, double> sdr;  // pooled over all landmarks and images
  std::vector<PerLandmarkStats> per_landmark;
  int n_images = 0;

  std::string table() const;
  nlohmann::json to_json() const;
};

inline const std::vector<double> kDefaultSdrThresholds{2.0, 2.5, 3.0, 4.0};

// Predictions and ground truth are matched by position; every pair must share
// geometry and K. An error counts as detected when it is <= the threshold.
EvalReport evaluate(const std::vector<LandmarkSet>& predictions,
                    const std::vector<LandmarkSet>& ground_truth,
                    const std::vector<double>& thresholds_mm = kDefaultSdrThresholds);

}  // namespace cc2d
