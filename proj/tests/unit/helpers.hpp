#pragma once

#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "edgenerf/geometry.hpp"
#include "edgenerf/random.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("edgenerf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline edgenerf::Camera simple_camera(int width = 16, int height = 12) {
  edgenerf::Camera c;
  c.width = width;
  c.height = height;
  c.fx = c.fy = 20.0;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.near = 0.1;
  c.far = 10.0;
  return c;
}

// Camera on a sphere of radius `distance` looking near the origin.
inline edgenerf::Camera orbit_camera(edgenerf::Rng& rng, double distance = 3.0, int size = 16) {
  const double az = 2.0 * std::numbers::pi * rng.uniform();
  const double el = -0.7 + 1.4 * rng.uniform();
  const edgenerf::Vec3 eye(distance * std::cos(el) * std::sin(az), distance * std::sin(el),
                           distance * std::cos(el) * std::cos(az));
  edgenerf::Camera c = simple_camera(size, size);
  c.fx = c.fy = 0.5 * size / std::tan(0.4);
  c.pose = edgenerf::look_at(eye, edgenerf::Vec3(0.1 * rng.uniform(), 0.0, -0.1 * rng.uniform()),
                             edgenerf::Vec3::UnitY());
  c.far = 8.0;
  return c;
}

}  // namespace testutil
