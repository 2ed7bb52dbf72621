#include <doctest.h>

#include <cmath>
#include <random>

#include "cc2d/metrics.hpp"

using namespace cc2d;

namespace {

ImageGeometry geom(double spacing = 1.0) {
  ImageGeometry g;
  g.original_width = 1000;
  g.original_height = 1000;
  g.pixel_spacing_mm = spacing;
  g.network_size = 384;
  return g;
}

LandmarkSet set_of(const ImageGeometry& g, const std::vector<std::pair<double, double>>& pts) {
  LandmarkSet s;
  s.geometry = g;
  for (size_t i = 0; i < pts.size(); ++i)
    s.landmarks.push_back({static_cast<int>(i), pts[i].first, pts[i].second, Frame::kOriginal});
  return s;
}

}  // namespace

TEST_CASE("radial error is the euclidean distance scaled by spacing") {
  const ImageGeometry g = geom(0.1);
  const Landmark p{0, 103.0, 200.0, Frame::kOriginal};
  const Landmark t{0, 100.0, 196.0, Frame::kOriginal};
  CHECK(radial_error_mm(p, t, g) == doctest::Approx(0.5).epsilon(1e-12));  // 3-4-5 triangle
  CHECK_THROWS(radial_error_mm(p, {1, 100.0, 196.0, Frame::kOriginal}, g));
}

TEST_CASE("hand-computed fixture: errors 1.5, 3.2, 5.0 mm") {
  const ImageGeometry g = geom(1.0);
  const LandmarkSet gt = set_of(g, {{100.0, 100.0}, {200.0, 200.0}, {300.0, 300.0}});
  const LandmarkSet pred = set_of(g, {{101.5, 100.0}, {200.0, 203.2}, {305.0, 300.0}});
  const EvalReport r = evaluate({pred}, {gt});
  CHECK(std::fabs(r.mre_mm - (1.5 + 3.2 + 5.0) / 3.0) < 1e-9);
  CHECK(std::fabs(r.sdr.at(2.0) - 1.0 / 3.0) < 1e-9);
  CHECK(std::fabs(r.sdr.at(2.5) - 1.0 / 3.0) < 1e-9);
  CHECK(std::fabs(r.sdr.at(3.0) - 1.0 / 3.0) < 1e-9);
  CHECK(std::fabs(r.sdr.at(4.0) - 2.0 / 3.0) < 1e-9);
}

TEST_CASE("threshold boundary counts as detected") {
  const ImageGeometry g = geom(1.0);
  const LandmarkSet gt = set_of(g, {{100.0, 100.0}});
  const LandmarkSet pred = set_of(g, {{102.0, 100.0}});  // exactly 2 mm
  const EvalReport r = evaluate({pred}, {gt});
  CHECK(r.sdr.at(2.0) == 1.0);
}

TEST_CASE("evaluate matches a brute-force oracle on random cases") {
  std::mt19937 rng(51);
  std::uniform_real_distribution<double> upos(10.0, 900.0), unoise(-6.0, 6.0);
  for (int trial = 0; trial < 50; ++trial) {
    const ImageGeometry g = geom(0.25);
    const int k = 1 + trial % 5, n = 1 + trial % 7;
    std::vector<LandmarkSet> preds, gts;
    std::vector<double> all_errors;
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<double, double>> gpts, ppts;
      for (int j = 0; j < k; ++j) {
        const double x = upos(rng), y = upos(rng);
        const double px = x + unoise(rng), py = y + unoise(rng);
        gpts.emplace_back(x, y);
        ppts.emplace_back(px, py);
        all_errors.push_back(std::hypot(px - x, py - y) * 0.25);
      }
      gts.push_back(set_of(g, gpts));
      preds.push_back(set_of(g, ppts));
    }
    const EvalReport r = evaluate(preds, gts);
    double mean = 0;
    for (double e : all_errors) mean += e;
    mean /= all_errors.size();
    CHECK(r.mre_mm == doctest::Approx(mean).epsilon(1e-9));
    for (double t : kDefaultSdrThresholds) {
      int hits = 0;
      for (double e : all_errors) hits += e <= t ? 1 : 0;
      CHECK(r.sdr.at(t) == doctest::Approx(double(hits) / all_errors.size()).epsilon(1e-12));
    }
    // SDR is monotone in the threshold.
    double prev = -1;
    for (double t : kDefaultSdrThresholds) {
      CHECK(r.sdr.at(t) >= prev);
      prev = r.sdr.at(t);
    }
  }
}

TEST_CASE("per-landmark rows aggregate to the pooled numbers") {
  const ImageGeometry g = geom(1.0);
  const LandmarkSet gt = set_of(g, {{100.0, 100.0}, {200.0, 200.0}});
  const LandmarkSet p1 = set_of(g, {{101.0, 100.0}, {200.0, 207.0}});
  const LandmarkSet p2 = set_of(g, {{103.0, 100.0}, {200.0, 201.0}});
  const EvalReport r = evaluate({p1, p2}, {gt, gt});
  REQUIRE(r.per_landmark.size() == 2);
  CHECK(r.per_landmark[0].mre_mm == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.per_landmark[1].mre_mm == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(r.mre_mm == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.n_images == 2);
}

TEST_CASE("mismatched inputs are rejected") {
  const ImageGeometry g = geom(1.0);
  const LandmarkSet a = set_of(g, {{1.0, 1.0}});
  const LandmarkSet b = set_of(g, {{1.0, 1.0}, {2.0, 2.0}});
  CHECK_THROWS(evaluate({a}, {b}));
  CHECK_THROWS(evaluate({a}, {}));
  CHECK_THROWS(evaluate({}, {}));
}
