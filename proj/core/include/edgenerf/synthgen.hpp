#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edgenerf/field.hpp"
#include "edgenerf/geometry.hpp"
#include "edgenerf/image.hpp"

namespace edgenerf {

// Constant albedo when checker_size == 0, otherwise a 3D checker alternating
// between `base` and `alt` with cells of edge length checker_size.
struct Albedo {
  Vec3 base = Vec3::Constant(0.5);
  Vec3 alt = Vec3::Constant(0.5);
  double checker_size = 0.0;

  Vec3 at(const Vec3& x) const;
};

struct Primitive {
  enum class Kind { Box, Sphere };
  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Constant(0.5);  // boxes
  double radius = 0.5;                      // spheres
  Albedo albedo;

  static Primitive box(const Vec3& center, const Vec3& half_extent, const Albedo& albedo);
  static Primitive sphere(const Vec3& center, double radius, const Albedo& albedo);

  double signed_distance(const Vec3& p) const;
  Vec3 closest_surface_point(const Vec3& p) const;
  Vec3 surface_normal(const Vec3& surface_point) const;
};

struct DirectionalLight {
  Vec3 direction = Vec3(0.0, 1.0, 0.0);  // unit, pointing towards the light
  double intensity = 1.0;
};

struct SyntheticScene {
  std::string name;
  std::vector<Primitive> primitives;
  DirectionalLight light;
  double ambient = 0.0;
  Vec3 background = Vec3::Zero();
  Aabb bounds;

  void validate() const;
  // Lambertian radiance at a surface point of `primitive`.
  Vec3 shade(const Primitive& primitive, const Vec3& point, const Vec3& normal) const;
};

// One textured box and one sphere standing on a table slab.
SyntheticScene box_on_table_scene();
// A box and a sphere at different depths, no table.
SyntheticScene two_object_scene();
SyntheticScene scene_by_name(const std::string& name);

struct TraceHit {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  Vec3 normal = Vec3::Zero();
  bool hit = false;
};

// Nearest intersection within [t_near, t_far].
TraceHit trace(const SyntheticScene& scene, const Ray& ray);

// Ray-sphere intersection distance (smallest root >= t_min), or a negative value.
double intersect_sphere(const Vec3& center, double radius, const Ray& ray, double t_min);

// Cameras on an orbit around the scene: training views on one elevation ring,
// held-out views interleaved on a lower ring.
struct RigSpec {
  int views_train = 3;
  int views_test = 5;
  int size = 128;
  double radius = 3.4;
  double train_elevation_deg = 30.0;
  double test_elevation_deg = 22.0;
  double arc_deg = 60.0;
  double fov_deg = 40.0;
  double near = 1.5;
  double far = 5.5;
};

std::vector<Camera> make_rig(const SyntheticScene& scene, const RigSpec& rig);

struct Dataset {
  std::filesystem::path root;
  std::vector<Camera> cameras;
  std::vector<RgbImage> images;
  std::vector<DepthImage> depths;
  std::vector<NormalImage> normals;
  std::vector<int> train;
  std::vector<int> test;
  Aabb bounds;
  bool has_edge_maps = false;

  int width() const { return images.empty() ? 0 : images.front().width(); }
  int height() const { return images.empty() ? 0 : images.front().height(); }
  std::filesystem::path edge_map_path(int view) const;
};

struct RenderedView {
  RgbImage color;
  DepthImage depth;
  NormalImage normal;
};

RenderedView trace_view(const SyntheticScene& scene, const Camera& camera);

// Writes cameras.txt, split.txt, bounds.txt, rgb/, depth/ and normal/.
Dataset generate_dataset(const SyntheticScene& scene, const RigSpec& rig, const std::filesystem::path& out_dir);
Dataset load_dataset(const std::filesystem::path& dir);

void write_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras);
std::vector<Camera> read_cameras(const std::filesystem::path& path);

// Hand-constructed voxel grid reproducing the scene: density is a steep
// softplus of the negated signed distance, colour the shaded radiance at the
// closest surface point.
FieldParams bake_scene_field(const SyntheticScene& scene, const std::array<int, 3>& resolution,
                             double sharpness = 1e6);

}  // namespace edgenerf
