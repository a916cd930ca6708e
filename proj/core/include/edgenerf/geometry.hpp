#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "edgenerf/image.hpp"
#include "edgenerf/types.hpp"

namespace edgenerf {

// Camera-to-world rigid transform.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// Pinhole camera. Image x points right, image y points down and the camera
// looks along its local +z axis. Pixel (u, v) has its center at (u + 0.5, v + 0.5).
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Pose pose;
  double near = 0.0;
  double far = 0.0;

  Vec3 position() const { return pose.translation; }

  // Throws InputDomainError when an invariant does not hold.
  void validate() const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
};

struct PixelCoord {
  int x = 0;  // column
  int y = 0;  // row
  bool operator==(const PixelCoord&) const = default;
};

// 2x2 block, members ordered top-left, top-right, bottom-left, bottom-right.
struct PixelPatch {
  int image_index = 0;
  std::array<PixelCoord, 4> pixels{};
  std::array<std::uint8_t, 4> indicator{};
};

Ray pixel_to_ray(const Camera& camera, int u, int v);

// Continuous pixel coordinates of a world point (pixel centers at +0.5).
Vec2 project(const Camera& camera, const Vec3& world);

PixelPatch make_patch(const EdgeIndicatorMap& edges, int image_index, PixelCoord top_left);

// Restricts the ray's [t_near, t_far] to the part inside the box.
std::optional<Ray> clip_to_box(const Ray& ray, const Aabb& box);

// Camera at `eye` looking at `target`; `up` is the approximate world up.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

}  // namespace edgenerf
