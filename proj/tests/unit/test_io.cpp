#include <doctest.h>

#include <fstream>

#include "edgenerf/errors.hpp"
#include "edgenerf/image_io.hpp"
#include "helpers.hpp"

using namespace edgenerf;

TEST_CASE("quantization rounds to nearest and clamps") {
  CHECK(quantize_unit(0.0) == 0);
  CHECK(quantize_unit(1.0) == 255);
  CHECK(quantize_unit(-0.5) == 0);
  CHECK(quantize_unit(2.0) == 255);
  CHECK(quantize_unit(0.5) == 128);
  CHECK(quantize_unit(100.4 / 255.0) == 100);
}

TEST_CASE("png round trips") {
  const auto dir = testutil::temp_dir("io_png");
  RgbImage rgb(5, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) rgb(x, y) = Vec3(x / 4.0, y / 2.0, (x + y) % 2);
  write_png_rgb(dir / "a.png", rgb);
  const RgbImage back = read_png_rgb(dir / "a.png");
  REQUIRE(back.width() == 5);
  REQUIRE(back.height() == 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) CHECK((back.pixels()[i] - rgb.pixels()[i]).cwiseAbs().maxCoeff() <= 0.5 / 255.0);

  GrayImage g(4, 2);
  for (int i = 0; i < 8; ++i) g.pixels()[i] = 30.0 * i;
  write_png_gray(dir / "g.png", g);
  CHECK(read_png_gray(dir / "g.png") == g);

  BinaryMap b(3, 3, 0);
  b(1, 1) = 1;
  write_png_binary(dir / "b.png", b);
  const GrayImage bg = read_png_gray(dir / "b.png");
  CHECK(bg(1, 1) == 255.0);
  CHECK(bg(0, 0) == 0.0);
  // grey files read as rgb
  CHECK(read_png_rgb(dir / "g.png")(1, 0) == Vec3::Constant(30.0 / 255.0));
}

TEST_CASE("pfm round trips exactly for float values") {
  const auto dir = testutil::temp_dir("io_pfm");
  Image<double> d(3, 4);
  for (int i = 0; i < 12; ++i) d.pixels()[i] = 0.25 * i - 1.0;
  write_pfm(dir / "d.pfm", d);
  CHECK(read_pfm_gray(dir / "d.pfm") == d);

  Image<Vec3> n(2, 2);
  n(0, 0) = Vec3(1, 0, 0);
  n(1, 0) = Vec3(0, 1, 0);
  n(0, 1) = Vec3(0, 0, -1);
  n(1, 1) = Vec3(0.5, 0.25, 0.125);
  write_pfm(dir / "n.pfm", n);
  CHECK(read_pfm_rgb(dir / "n.pfm") == n);

  std::ifstream raw(dir / "d.pfm", std::ios::binary);
  std::string magic, width, height, scale;
  raw >> magic >> width >> height >> scale;
  CHECK(magic == "Pf");
  CHECK(scale == "-1.0");
}

TEST_CASE("malformed files raise IoError") {
  const auto dir = testutil::temp_dir("io_bad");
  std::ofstream(dir / "x.png") << "not a png";
  std::ofstream(dir / "x.pfm") << "P5\n1 1\n";
  CHECK_THROWS_AS(read_png_rgb(dir / "x.png"), IoError);
  CHECK_THROWS_AS(read_pfm_gray(dir / "x.pfm"), IoError);
  CHECK_THROWS_AS(read_png_gray(dir / "missing.png"), IoError);
  CHECK_THROWS_AS(write_png_rgb(dir / "no" / "such" / "dir.png", RgbImage(1, 1)), IoError);
}
