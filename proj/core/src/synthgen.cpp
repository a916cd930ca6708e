#include "edgenerf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "edgenerf/errors.hpp"
#include "edgenerf/image_io.hpp"

namespace edgenerf {
namespace {

namespace fs = std::filesystem;

std::string view_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d.%s", index, ext);
  return buf;
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Slab test; returns the entry distance (>= t_min) and entry normal.
bool intersect_box(const Primitive& box, const Ray& ray, double t_min, double& t_hit, Vec3& normal) {
  const Vec3 lo = box.center - box.half_extent;
  const Vec3 hi = box.center + box.half_extent;
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  int entry_axis = -1;
  double entry_sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - ray.origin[a]) / d;
    double tb = (hi[a] - ray.origin[a]) / d;
    double s = -1.0;  // entering through the low face means the normal points to -a
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      entry_axis = a;
      entry_sign = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || entry_axis < 0) return false;
  if (t0 >= t_min) {
    t_hit = t0;
    normal = Vec3::Zero();
    normal[entry_axis] = entry_sign;
    return true;
  }
  return false;
}

}  // namespace

Vec3 Albedo::at(const Vec3& x) const {
  if (checker_size <= 0.0) return base;
  const long parity = static_cast<long>(std::floor(x.x() / checker_size)) +
                      static_cast<long>(std::floor(x.y() / checker_size)) +
                      static_cast<long>(std::floor(x.z() / checker_size));
  return (parity & 1) ? alt : base;
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extent, const Albedo& albedo) {
  Primitive p;
  p.kind = Kind::Box;
  p.center = center;
  p.half_extent = half_extent;
  p.albedo = albedo;
  return p;
}

Primitive Primitive::sphere(const Vec3& center, double radius, const Albedo& albedo) {
  Primitive p;
  p.kind = Kind::Sphere;
  p.center = center;
  p.radius = radius;
  p.albedo = albedo;
  return p;
}

double Primitive::signed_distance(const Vec3& p) const {
  if (kind == Kind::Sphere) return (p - center).norm() - radius;
  const Vec3 q = (p - center).cwiseAbs() - half_extent;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 Primitive::closest_surface_point(const Vec3& p) const {
  if (kind == Kind::Sphere) {
    const Vec3 d = p - center;
    const double n = d.norm();
    return center + radius * (n > 0.0 ? Vec3(d / n) : Vec3::UnitY());
  }
  const Vec3 local = p - center;
  const Vec3 q = local.cwiseAbs() - half_extent;
  if ((q.array() > 0.0).any()) return center + local.cwiseMax(-half_extent).cwiseMin(half_extent);
  int axis = 0;
  q.maxCoeff(&axis);
  Vec3 out = local;
  out[axis] = local[axis] >= 0.0 ? half_extent[axis] : -half_extent[axis];
  return center + out;
}

Vec3 Primitive::surface_normal(const Vec3& s) const {
  if (kind == Kind::Sphere) return (s - center).normalized();
  const Vec3 local = s - center;
  const Vec3 q = local.cwiseAbs() - half_extent;
  int axis = 0;
  q.maxCoeff(&axis);
  Vec3 n = Vec3::Zero();
  n[axis] = local[axis] >= 0.0 ? 1.0 : -1.0;
  return n;
}

void SyntheticScene::validate() const {
  if (!(light.intensity > 0.0)) throw InputDomainError("scene: light intensity must be positive");
  if (std::abs(light.direction.norm() - 1.0) > 1e-9) throw InputDomainError("scene: light direction must be unit");
  for (const Primitive& p : primitives) {
    const Vec3 reach = p.kind == Primitive::Kind::Box ? p.half_extent : Vec3::Constant(p.radius);
    Aabb box{p.center - reach, p.center + reach};
    if (!bounds.contains(box.lo) || !bounds.contains(box.hi)) {
      throw InputDomainError("scene: primitive outside the scene bounding box");
    }
  }
}

Vec3 SyntheticScene::shade(const Primitive& primitive, const Vec3& point, const Vec3& normal) const {
  // sample the albedo just below the surface so checker cells on a face are stable
  const Vec3 albedo = primitive.albedo.at(point - 1e-7 * normal);
  const double lambert = std::max(normal.dot(light.direction), 0.0);
  const Vec3 c = (light.intensity * lambert * albedo).array() + ambient;
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

SyntheticScene box_on_table_scene() {
  SyntheticScene s;
  s.name = "box";
  s.bounds = Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  s.light.direction = Vec3(0.45, 0.8, 0.4).normalized();
  s.light.intensity = 0.9;
  s.ambient = 0.06;
  // Box faces sit on multiples of 1/32 so they coincide with vertex planes of
  // 65- and 129-vertex grids over the bounds.
  s.primitives.push_back(Primitive::box(Vec3(0.0, -0.5625, 0.0), Vec3(0.875, 0.0625, 0.875),
                                        Albedo{Vec3(0.62, 0.6, 0.55), Vec3(0.62, 0.6, 0.55), 0.0}));
  s.primitives.push_back(Primitive::box(Vec3(-0.3125, -0.203125, -0.125), Vec3(0.25, 0.296875, 0.25),
                                        Albedo{Vec3(0.9, 0.3, 0.15), Vec3(0.95, 0.85, 0.35), 0.25}));
  s.primitives.push_back(Primitive::sphere(Vec3(0.42, -0.22, 0.26), 0.28,
                                           Albedo{Vec3(0.15, 0.35, 0.85), Vec3(0.15, 0.35, 0.85), 0.0}));
  return s;
}

SyntheticScene two_object_scene() {
  SyntheticScene s;
  s.name = "two-object";
  s.bounds = Aabb{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  s.light.direction = Vec3(0.3, 0.85, 0.45).normalized();
  s.light.intensity = 0.9;
  s.ambient = 0.08;
  s.primitives.push_back(Primitive::box(Vec3(-0.35, -0.1, -0.3), Vec3(0.3, 0.35, 0.3),
                                        Albedo{Vec3(0.85, 0.55, 0.2), Vec3(0.3, 0.7, 0.3), 0.3}));
  s.primitives.push_back(Primitive::sphere(Vec3(0.35, 0.0, 0.35), 0.35,
                                           Albedo{Vec3(0.7, 0.7, 0.75), Vec3(0.7, 0.7, 0.75), 0.0}));
  return s;
}

SyntheticScene scene_by_name(const std::string& name) {
  if (name == "box" || name == "box-on-table") return box_on_table_scene();
  if (name == "two-object") return two_object_scene();
  throw ConfigError("unknown scene '" + name + "' (expected box or two-object)");
}

double intersect_sphere(const Vec3& center, double radius, const Ray& ray, double t_min) {
  const Vec3 oc = ray.origin - center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  // numerically stable pair of roots
  const double q = b > 0.0 ? -b - sq : -b + sq;
  double t0 = q;
  double t1 = c / q;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 >= t_min) return t0;
  if (t1 >= t_min) return t1;
  return -1.0;
}

TraceHit trace(const SyntheticScene& scene, const Ray& ray) {
  TraceHit best;
  best.color = scene.background;
  double best_t = std::numeric_limits<double>::infinity();
  const Primitive* best_prim = nullptr;
  Vec3 best_normal = Vec3::Zero();
  for (const Primitive& p : scene.primitives) {
    double t = -1.0;
    Vec3 n;
    if (p.kind == Primitive::Kind::Sphere) {
      t = intersect_sphere(p.center, p.radius, ray, ray.t_near);
      if (t >= 0.0) n = (ray.at(t) - p.center).normalized();
    } else if (!intersect_box(p, ray, ray.t_near, t, n)) {
      t = -1.0;
    }
    if (t >= ray.t_near && t <= ray.t_far && t < best_t) {
      best_t = t;
      best_prim = &p;
      best_normal = n;
    }
  }
  if (best_prim) {
    best.hit = true;
    best.depth = best_t;
    best.normal = best_normal;
    best.color = scene.shade(*best_prim, ray.at(best_t), best_normal);
  }
  return best;
}

std::vector<Camera> make_rig(const SyntheticScene& scene, const RigSpec& rig) {
  if (rig.views_train < 1 || rig.views_test < 0 || rig.size < 2) throw ConfigError("rig: invalid view counts or size");
  const Vec3 target(scene.bounds.center().x(), -0.2, scene.bounds.center().z());
  const double f = 0.5 * rig.size / std::tan(0.5 * deg(rig.fov_deg));
  auto make = [&](double azimuth_deg, double elevation_deg) {
    const double az = deg(azimuth_deg), el = deg(elevation_deg);
    const Vec3 eye = target + rig.radius * Vec3(std::sin(az) * std::cos(el), std::sin(el), std::cos(az) * std::cos(el));
    Camera cam;
    cam.width = cam.height = rig.size;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = 0.5 * rig.size;
    cam.pose = look_at(eye, target, Vec3::UnitY());
    cam.near = rig.near;
    cam.far = rig.far;
    return cam;
  };
  std::vector<Camera> cams;
  const double half = 0.5 * rig.arc_deg;
  for (int i = 0; i < rig.views_train; ++i) {
    const double a = rig.views_train == 1 ? 0.0 : -half + rig.arc_deg * i / (rig.views_train - 1);
    cams.push_back(make(a, rig.train_elevation_deg));
  }
  // held-out views sit strictly inside the training arc, offset from training azimuths
  for (int i = 0; i < rig.views_test; ++i) {
    const double a = -half + rig.arc_deg * (i + 0.5) / rig.views_test;
    cams.push_back(make(a, rig.test_elevation_deg));
  }
  return cams;
}

RenderedView trace_view(const SyntheticScene& scene, const Camera& camera) {
  RenderedView v{RgbImage(camera.width, camera.height), DepthImage(camera.width, camera.height, 0.0),
                 NormalImage(camera.width, camera.height, Vec3::Zero())};
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const TraceHit hit = trace(scene, pixel_to_ray(camera, x, y));
      v.color(x, y) = hit.color;
      v.depth(x, y) = hit.depth;
      v.normal(x, y) = hit.normal;
    }
  }
  return v;
}

std::filesystem::path Dataset::edge_map_path(int view) const { return root / "edges" / view_name(view, "png"); }

void write_cameras(const fs::path& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& c = cameras[i];
    out << i << ' ' << c.width << ' ' << c.height << ' ' << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) out << ' ' << c.pose.rotation(r, col);
      out << ' ' << c.pose.translation[r];
    }
    out << ' ' << c.near << ' ' << c.far << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Camera> read_cameras(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Camera> cams;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t index = 0;
    Camera c;
    ls >> index >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) ls >> c.pose.rotation(r, col);
      ls >> c.pose.translation[r];
    }
    ls >> c.near >> c.far;
    if (!ls) throw ConfigError(path.string() + ": malformed camera record: " + line);
    if (index != cams.size()) throw ConfigError(path.string() + ": camera indices must be consecutive from 0");
    c.validate();
    cams.push_back(c);
  }
  return cams;
}

Dataset generate_dataset(const SyntheticScene& scene, const RigSpec& rig, const fs::path& out_dir) {
  scene.validate();
  const std::vector<Camera> cams = make_rig(scene, rig);
  std::error_code ec;
  for (const char* sub : {"rgb", "depth", "normal"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  write_cameras(out_dir / "cameras.txt", cams);
  {
    std::ofstream split(out_dir / "split.txt");
    split << "train";
    for (int i = 0; i < rig.views_train; ++i) split << ' ' << i;
    split << "\ntest";
    for (int i = 0; i < rig.views_test; ++i) split << ' ' << rig.views_train + i;
    split << '\n';
    if (!split) throw IoError("failed writing split.txt");
  }
  {
    std::ofstream bounds(out_dir / "bounds.txt");
    bounds.precision(17);
    bounds << scene.bounds.lo.x() << ' ' << scene.bounds.lo.y() << ' ' << scene.bounds.lo.z() << ' '
           << scene.bounds.hi.x() << ' ' << scene.bounds.hi.y() << ' ' << scene.bounds.hi.z() << '\n';
    if (!bounds) throw IoError("failed writing bounds.txt");
  }
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const RenderedView v = trace_view(scene, cams[i]);
    write_png_rgb(out_dir / "rgb" / view_name(static_cast<int>(i), "png"), v.color);
    write_pfm(out_dir / "depth" / view_name(static_cast<int>(i), "pfm"), v.depth);
    write_pfm(out_dir / "normal" / view_name(static_cast<int>(i), "pfm"), v.normal);
  }
  return load_dataset(out_dir);
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("dataset directory " + dir.string() + " does not exist");
  Dataset d;
  d.root = dir;
  d.cameras = read_cameras(dir / "cameras.txt");
  if (d.cameras.empty()) throw ConfigError("dataset has no cameras");
  const int n = static_cast<int>(d.cameras.size());

  std::ifstream split(dir / "split.txt");
  if (split) {
    std::string line;
    while (std::getline(split, line)) {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      std::vector<int>& target = tag == "train" ? d.train : d.test;
      if (tag != "train" && tag != "test") continue;
      for (int idx; ls >> idx;) {
        if (idx < 0 || idx >= n) throw ConfigError("split.txt references missing view " + std::to_string(idx));
        target.push_back(idx);
      }
    }
  } else {
    for (int i = 0; i < n; ++i) d.train.push_back(i);
  }
  if (d.train.empty()) throw ConfigError("dataset has no training views");

  std::ifstream bounds(dir / "bounds.txt");
  if (bounds) {
    bounds >> d.bounds.lo.x() >> d.bounds.lo.y() >> d.bounds.lo.z() >> d.bounds.hi.x() >> d.bounds.hi.y() >>
        d.bounds.hi.z();
    if (!bounds) throw ConfigError("malformed bounds.txt");
  }

  for (int i = 0; i < n; ++i) {
    d.images.push_back(read_png_rgb(dir / "rgb" / view_name(i, "png")));
    const fs::path depth = dir / "depth" / view_name(i, "pfm");
    const fs::path normal = dir / "normal" / view_name(i, "pfm");
    d.depths.push_back(fs::exists(depth) ? read_pfm_gray(depth) : DepthImage());
    d.normals.push_back(fs::exists(normal) ? read_pfm_rgb(normal) : NormalImage());
    const RgbImage& img = d.images.back();
    if (img.width() != d.images.front().width() || img.height() != d.images.front().height()) {
      throw ConfigError("dataset images do not share dimensions");
    }
    if (img.width() != d.cameras[i].width || img.height() != d.cameras[i].height) {
      throw ConfigError("image " + std::to_string(i) + " does not match its camera record");
    }
  }
  d.has_edge_maps = fs::is_directory(dir / "edges");
  return d;
}

FieldParams bake_scene_field(const SyntheticScene& scene, const std::array<int, 3>& resolution, double sharpness) {
  GridLayout layout{resolution, scene.bounds};
  FieldParams field = FieldParams::voxel_grid(layout);
  const Vec3 lo = scene.bounds.lo;
  const Vec3 h = scene.bounds.extent().cwiseQuotient(
      Vec3(resolution[0] - 1, resolution[1] - 1, resolution[2] - 1));
  auto logit = [](double c) {
    c = std::clamp(c, 1e-4, 1.0 - 1e-4);
    return std::log(c / (1.0 - c));
  };
  for (int k = 0; k < resolution[2]; ++k) {
    for (int j = 0; j < resolution[1]; ++j) {
      for (int i = 0; i < resolution[0]; ++i) {
        const Vec3 p = lo + Vec3(i, j, k).cwiseProduct(h);
        const Primitive* nearest = nullptr;
        double sdf = std::numeric_limits<double>::infinity();
        for (const Primitive& prim : scene.primitives) {
          const double d = prim.signed_distance(p);
          if (d < sdf) {
            sdf = d;
            nearest = &prim;
          }
        }
        field.vertex(i, j, k, 0) = nearest ? -sharpness * sdf : -sharpness;
        Vec3 color = scene.background;
        if (nearest) {
          const Vec3 s = nearest->closest_surface_point(p);
          color = scene.shade(*nearest, s, nearest->surface_normal(s));
        }
        for (int c = 0; c < 3; ++c) field.vertex(i, j, k, c + 1) = logit(color[c]);
      }
    }
  }
  return field;
}

}  // namespace edgenerf
