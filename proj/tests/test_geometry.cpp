#include <doctest.h>

#include <random>

#include "cc2d/geometry.hpp"

using namespace cc2d;

namespace {

ImageGeometry geom_1935() {
  ImageGeometry g;
  g.original_width = 1935;
  g.original_height = 2400;
  g.pixel_spacing_mm = 0.1;
  g.network_size = 384;
  return g;
}

}  // namespace

TEST_CASE("frame conversion scales each axis independently") {
  const ImageGeometry g = geom_1935();
  const Landmark lm{3, 967.5, 1200.0, Frame::kOriginal};
  const Landmark nl = to_network_frame(lm, g);
  CHECK(nl.frame == Frame::kNetwork);
  CHECK(nl.x == doctest::Approx(967.5 * 384.0 / 1935.0).epsilon(1e-12));
  CHECK(nl.y == doctest::Approx(1200.0 * 384.0 / 2400.0).epsilon(1e-12));
  CHECK(nl.index == 3);
}

TEST_CASE("frame round-trip is exact to double precision") {
  const ImageGeometry g = geom_1935();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ux(0.0, 1934.0), uy(0.0, 2399.0);
  for (int i = 0; i < 200; ++i) {
    const Landmark lm{0, ux(rng), uy(rng), Frame::kOriginal};
    const Landmark back = from_network_frame(to_network_frame(lm, g), g);
    CHECK(back.x == doctest::Approx(lm.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(lm.y).epsilon(1e-12));
  }
}

TEST_CASE("conversion rejects out-of-bounds input") {
  const ImageGeometry g = geom_1935();
  CHECK_THROWS(to_network_frame({0, -1.0, 10.0, Frame::kOriginal}, g));
  CHECK_THROWS(to_network_frame({0, 10.0, 2400.0, Frame::kOriginal}, g));
  CHECK_THROWS(to_network_frame({0, 10.0, 10.0, Frame::kNetwork}, g));  // wrong source frame
  CHECK_THROWS(from_network_frame({0, 384.0, 10.0, Frame::kNetwork}, g));
}

TEST_CASE("downsample_coord floors at every level") {
  CHECK(downsample_coord(100.0, 60.0, 5) == std::pair<int, int>(3, 1));
  CHECK(downsample_coord(383.0, 383.0, 5) == std::pair<int, int>(11, 11));
  CHECK(downsample_coord(383.0, 383.0, 1) == std::pair<int, int>(191, 191));
  CHECK(downsample_coord(0.0, 0.0, 3) == std::pair<int, int>(0, 0));
  CHECK(downsample_coord(31.9, 31.9, 5) == std::pair<int, int>(0, 0));
  CHECK(downsample_coord(32.0, 32.0, 5) == std::pair<int, int>(1, 1));
  CHECK_THROWS(downsample_coord(1.0, 1.0, 0));
  CHECK_THROWS(downsample_coord(1.0, 1.0, 6));
}

TEST_CASE("level_side halves per level") {
  CHECK(level_side(384, 1) == 192);
  CHECK(level_side(384, 5) == 12);
  CHECK(level_side(192, 5) == 6);
}

TEST_CASE("landmark set validation") {
  ImageGeometry g = geom_1935();
  LandmarkSet set;
  set.geometry = g;
  set.landmarks = {{0, 1.0, 2.0, Frame::kOriginal}, {1, 3.0, 4.0, Frame::kOriginal}};
  CHECK_NOTHROW(set.validate());

  LandmarkSet bad_order = set;
  std::swap(bad_order.landmarks[0], bad_order.landmarks[1]);
  CHECK_THROWS(bad_order.validate());

  LandmarkSet mixed = set;
  mixed.landmarks[1].frame = Frame::kNetwork;
  CHECK_THROWS(mixed.validate());

  LandmarkSet oob = set;
  oob.landmarks[1].x = 1935.0;
  CHECK_THROWS(oob.validate());
}

TEST_CASE("whole-set conversion keeps geometry and order") {
  ImageGeometry g = geom_1935();
  LandmarkSet set;
  set.geometry = g;
  set.landmarks = {{0, 100.0, 200.0, Frame::kOriginal}, {1, 300.0, 400.0, Frame::kOriginal}};
  const LandmarkSet net = to_network_frame(set);
  CHECK(net.landmarks[0].frame == Frame::kNetwork);
  const LandmarkSet back = from_network_frame(net);
  for (int i = 0; i < 2; ++i) {
    CHECK(back.landmarks[i].x == doctest::Approx(set.landmarks[i].x).epsilon(1e-12));
    CHECK(back.landmarks[i].y == doctest::Approx(set.landmarks[i].y).epsilon(1e-12));
  }
}
