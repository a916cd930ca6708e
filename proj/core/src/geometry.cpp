#include "edgenerf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edgenerf/errors.hpp"

namespace edgenerf {

void Camera::validate() const {
  if (width < 2 || height < 2) throw InputDomainError("camera: image must be at least 2x2");
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputDomainError("camera: focal lengths must be positive");
  if (!(near > 0.0) || !(near < far)) throw InputDomainError("camera: require 0 < near < far");
  const Mat3& r = pose.rotation;
  const double residual = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (residual > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9) {
    throw InputDomainError("camera: pose rotation is not a proper orthonormal matrix");
  }
}

Ray pixel_to_ray(const Camera& camera, int u, int v) {
  if (u < 0 || v < 0 || u >= camera.width || v >= camera.height) {
    throw InputDomainError("pixel_to_ray: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                           ") outside image");
  }
  const Vec3 local((u + 0.5 - camera.cx) / camera.fx, (v + 0.5 - camera.cy) / camera.fy, 1.0);
  Ray ray;
  ray.origin = camera.pose.translation;
  ray.direction = (camera.pose.rotation * local).normalized();
  ray.t_near = camera.near;
  ray.t_far = camera.far;
  return ray;
}

Vec2 project(const Camera& camera, const Vec3& world) {
  const Vec3 local = camera.pose.rotation.transpose() * (world - camera.pose.translation);
  return {camera.fx * local.x() / local.z() + camera.cx, camera.fy * local.y() / local.z() + camera.cy};
}

PixelPatch make_patch(const EdgeIndicatorMap& edges, int image_index, PixelCoord top_left) {
  if (top_left.x < 0 || top_left.y < 0 || top_left.x + 1 >= edges.width() ||
      top_left.y + 1 >= edges.height()) {
    throw InputDomainError("make_patch: 2x2 block exceeds image bounds");
  }
  PixelPatch patch;
  patch.image_index = image_index;
  patch.pixels = {PixelCoord{top_left.x, top_left.y}, PixelCoord{top_left.x + 1, top_left.y},
                  PixelCoord{top_left.x, top_left.y + 1}, PixelCoord{top_left.x + 1, top_left.y + 1}};
  for (int i = 0; i < 4; ++i) patch.indicator[i] = edges(patch.pixels[i].x, patch.pixels[i].y);
  return patch;
}

std::optional<Ray> clip_to_box(const Ray& ray, const Aabb& box) {
  double t0 = ray.t_near;
  double t1 = ray.t_far;
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (std::abs(d) < 1e-15) {
      if (o < box.lo[a] || o > box.hi[a]) return std::nullopt;
      continue;
    }
    double ta = (box.lo[a] - o) / d;
    double tb = (box.hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  Ray clipped = ray;
  clipped.t_near = t0;
  clipped.t_far = t1;
  return clipped;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Pose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

}  // namespace edgenerf
