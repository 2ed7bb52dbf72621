#include "cc2d/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cc2d {

double radial_error_mm(const Landmark& pred, const Landmark& gt, const ImageGeometry& geom) {
  if (pred.index != gt.index) throw std::invalid_argument("radial_error_mm: index mismatch");
  if (pred.frame != Frame::kOriginal || gt.frame != Frame::kOriginal)
    throw std::invalid_argument("radial_error_mm: landmarks must be in the original frame");
  const double dx = pred.x - gt.x;
  const double dy = pred.y - gt.y;
  return std::sqrt(dx * dx + dy * dy) * geom.pixel_spacing_mm;
}

EvalReport evaluate(const std::vector<LandmarkSet>& predictions,
                    const std::vector<LandmarkSet>& ground_truth,
                    const std::vector<double>& thresholds_mm) {
  if (predictions.size() != ground_truth.size())
    throw std::invalid_argument("evaluate: prediction/ground-truth count mismatch");
  if (predictions.empty()) throw std::invalid_argument("evaluate: no images");
  const int k = ground_truth[0].k();

  // errors[lm][image]
  std::vector<std::vector<double>> errors(k);
  for (size_t i = 0; i < predictions.size(); ++i) {
    const LandmarkSet& p = predictions[i];
    const LandmarkSet& g = ground_truth[i];
    p.validate();
    g.validate();
    if (p.k() != k || g.k() != k) throw std::invalid_argument("evaluate: landmark count mismatch");
    if (!(p.geometry == g.geometry))
      throw std::invalid_argument("evaluate: geometry mismatch between prediction and ground truth");
    for (int j = 0; j < k; ++j)
      errors[j].push_back(radial_error_mm(p.landmarks[j], g.landmarks[j], g.geometry));
  }

  EvalReport report;
  report.n_images = static_cast<int>(predictions.size());
  double total = 0.0;
  std::map<double, int> hits;
  for (double t : thresholds_mm) hits[t] = 0;
  for (int j = 0; j < k; ++j) {
    PerLandmarkStats row;
    row.index = j;
    double sum = 0.0;
    std::map<double, int> lm_hits;
    for (double t : thresholds_mm) lm_hits[t] = 0;
    for (double e : errors[j]) {
      sum += e;
      for (double t : thresholds_mm)
        if (e <= t) ++lm_hits[t];
    }
    row.mre_mm = sum / errors[j].size();
    for (double t : thresholds_mm) {
      row.sdr[t] = static_cast<double>(lm_hits[t]) / errors[j].size();
      hits[t] += lm_hits[t];
    }
    total += sum;
    report.per_landmark.push_back(std::move(row));
  }
  const double n_total = static_cast<double>(k) * report.n_images;
  report.mre_mm = total / n_total;
  for (double t : thresholds_mm) report.sdr[t] = hits[t] / n_total;
  return report;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "landmark  MRE(mm)";
  for (const auto& [t, _] : sdr) os << "  SDR@" << std::setprecision(1) << t << std::setprecision(3);
  os << "\n";
  for (const auto& row : per_landmark) {
    os << std::setw(8) << row.index << "  " << std::setw(7) << row.mre_mm;
    for (const auto& [t, _] : sdr) os << "  " << std::setw(6) << 100.0 * row.sdr.at(t) << "%";
    os << "\n";
  }
  os << std::setw(8) << "all" << "  " << std::setw(7) << mre_mm;
  for (const auto& [_, v] : sdr) os << "  " << std::setw(6) << 100.0 * v << "%";
  os << "\n";
  return os.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["mre_mm"] = mre_mm;
  j["n_images"] = n_images;
  for (const auto& [t, v] : sdr) j["sdr"][std::to_string(t)] = v;
  for (const auto& row : per_landmark) {
    nlohmann::json r;
    r["index"] = row.index;
    r["mre_mm"] = row.mre_mm;
    for (const auto& [t, v] : row.sdr) r["sdr"][std::to_string(t)] = v;
    j["per_landmark"].push_back(std::move(r));
  }
  return j;
}

}  // namespace cc2d
