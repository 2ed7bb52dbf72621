#include <doctest.h>

#include <cmath>
#include <random>

#include "cc2d/detector.hpp"

using namespace cc2d;

namespace {

ImageGeometry small_geom(int net = 64) {
  ImageGeometry g;
  g.original_width = 2 * net;
  g.original_height = 2 * net;
  g.pixel_spacing_mm = 0.5;
  g.network_size = net;
  return g;
}

LandmarkSet make_set(const ImageGeometry& g, const std::vector<cv::Point2d>& pts, Frame f) {
  LandmarkSet s;
  s.geometry = g;
  for (size_t i = 0; i < pts.size(); ++i)
    s.landmarks.push_back({static_cast<int>(i), pts[i].x, pts[i].y, f});
  return s;
}

}  // namespace

TEST_CASE("a radius-3 disc covers exactly 29 pixels") {
  const ImageGeometry g = small_geom();
  const LandmarkSet lms = make_set(g, {{30.0, 30.0}}, Frame::kNetwork);
  const HeatmapOffsetMaps maps = build_targets(lms, 3.0, g.network_size);
  int count = 0;
  for (float v : maps.heat.v) {
    CHECK((v == 0.f || v == 1.f));
    count += v > 0 ? 1 : 0;
  }
  CHECK(count == 29);
}

TEST_CASE("offsets are (pixel - landmark) / sigma everywhere") {
  const ImageGeometry g = small_geom();
  const LandmarkSet lms = make_set(g, {{20.5, 33.25}}, Frame::kNetwork);
  const double sigma = 3.0;
  const HeatmapOffsetMaps maps = build_targets(lms, sigma, g.network_size);
  for (int y = 0; y < g.network_size; y += 13)
    for (int x = 0; x < g.network_size; x += 11) {
      CHECK(maps.off_x.at(0, y, x) == doctest::Approx((x - 20.5) / sigma).epsilon(1e-6));
      CHECK(maps.off_y.at(0, y, x) == doctest::Approx((y - 33.25) / sigma).epsilon(1e-6));
    }
}

TEST_CASE("decode inverts build_targets exactly for 100 random landmark sets") {
  std::mt19937 rng(41);
  const ImageGeometry g = small_geom();
  const double sigma = 3.0;
  std::uniform_int_distribution<int> u(4, g.network_size - 5);  // margin > sigma
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<cv::Point2d> pts;
    for (int k = 0; k < 3; ++k) pts.emplace_back(u(rng), u(rng));
    const LandmarkSet lms = make_set(g, pts, Frame::kNetwork);
    const HeatmapOffsetMaps maps = build_targets(lms, sigma, g.network_size);
    const DecodeResult res = decode(maps, sigma, g);
    for (int k = 0; k < 3; ++k) {
      CHECK(res.network.landmarks[k].x == pts[k].x);
      CHECK(res.network.landmarks[k].y == pts[k].y);
      CHECK(res.votes[k] == 29);  // every disc pixel agrees
    }
  }
}

TEST_CASE("vote ties break to the smallest row-major index") {
  const ImageGeometry g = small_geom();
  HeatmapOffsetMaps maps;
  maps.heat = Tensor(1, g.network_size, g.network_size);
  maps.off_x = Tensor(1, g.network_size, g.network_size);
  maps.off_y = Tensor(1, g.network_size, g.network_size);
  maps.heat.zero();
  maps.off_x.zero();
  maps.off_y.zero();
  // Two voters each for (10, 10) and (5, 20); zero offsets make pixels vote
  // for themselves, so duplicate both positions... but a pixel can vote only
  // once, so steer two remote pixels onto each target instead.
  const double sigma = 1.0;
  auto steer = [&](int px, int py, int tx, int ty) {
    maps.heat.at(0, py, px) = 1.f;
    maps.off_x.at(0, py, px) = static_cast<float>(px - tx);
    maps.off_y.at(0, py, px) = static_cast<float>(py - ty);
  };
  steer(30, 30, 10, 10);
  steer(31, 30, 10, 10);
  steer(40, 40, 5, 20);
  steer(41, 40, 5, 20);
  const DecodeResult res = decode(maps, sigma, g);
  // (10, 10) has row-major index 10 * 64 + 10 = 650, below (5, 20)'s 1285.
  CHECK(res.network.landmarks[0].x == 10.0);
  CHECK(res.network.landmarks[0].y == 10.0);
  CHECK(res.votes[0] == 2);
}

TEST_CASE("an under-confident peak still votes via the relative threshold") {
  const ImageGeometry g = small_geom();
  HeatmapOffsetMaps maps;
  maps.heat = Tensor(1, g.network_size, g.network_size);
  maps.off_x = Tensor(1, g.network_size, g.network_size);
  maps.off_y = Tensor(1, g.network_size, g.network_size);
  maps.heat.zero();
  maps.off_x.zero();
  maps.off_y.zero();
  maps.heat.at(0, 17, 23) = 0.4f;  // half-of-peak cut, not an absolute 0.5
  maps.heat.at(0, 30, 30) = 0.1f;  // below half the peak, must not vote
  const DecodeResult res = decode(maps, 3.0, g);
  CHECK(res.network.landmarks[0].x == 23.0);
  CHECK(res.network.landmarks[0].y == 17.0);
  CHECK(res.votes[0] == 1);
}

TEST_CASE("an all-zero heatmap falls back to the argmax with no votes") {
  const ImageGeometry g = small_geom();
  HeatmapOffsetMaps maps;
  maps.heat = Tensor(1, g.network_size, g.network_size);
  maps.off_x = Tensor(1, g.network_size, g.network_size);
  maps.off_y = Tensor(1, g.network_size, g.network_size);
  maps.heat.zero();
  maps.off_x.zero();
  maps.off_y.zero();
  const DecodeResult res = decode(maps, 3.0, g);
  CHECK(res.network.landmarks[0].x == 0.0);
  CHECK(res.network.landmarks[0].y == 0.0);
  CHECK(res.votes[0] == 0);
}

TEST_CASE("detector loss on an 8x8 hand-checked instance") {
  // One landmark, 8x8 map, landmark at (3, 3), sigma 1 -> disc of 5 pixels.
  const int size = 8;
  ImageGeometry g;
  g.original_width = g.original_height = 16;
  g.network_size = size;
  const LandmarkSet lms = make_set(g, {{3.0, 3.0}}, Frame::kNetwork);
  const HeatmapOffsetMaps gt = build_targets(lms, 1.0, size);
  int disc = 0;
  for (float v : gt.heat.v) disc += v > 0 ? 1 : 0;
  CHECK(disc == 5);

  // Prediction: probabilities 0.5 everywhere, offsets = gt + 0.25.
  HeatmapOffsetMaps pred;
  pred.heat = Tensor(1, size, size);
  for (auto& v : pred.heat.v) v = 0.5f;
  pred.off_x = gt.off_x;
  pred.off_y = gt.off_y;
  for (auto& v : pred.off_x.v) v += 0.25f;
  for (auto& v : pred.off_y.v) v -= 0.25f;

  // BCE with p = 0.5 is ln 2 per pixel; L1 is (0.25 + 0.25) per disc pixel,
  // averaged over the 5 disc pixels.
  const double expect = std::log(2.0) + 0.5;
  CHECK(tpl_loss(pred, gt) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("loss sums over landmarks") {
  const int size = 8;
  ImageGeometry g;
  g.original_width = g.original_height = 16;
  g.network_size = size;
  const LandmarkSet two = make_set(g, {{3.0, 3.0}, {5.0, 5.0}}, Frame::kNetwork);
  const HeatmapOffsetMaps gt = build_targets(two, 1.0, size);
  HeatmapOffsetMaps pred = gt;
  for (auto& v : pred.heat.v) v = 0.5f;
  CHECK(tpl_loss(pred, gt) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-5));
}
