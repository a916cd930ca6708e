#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "edgenerf/edgemap.hpp"
#include "edgenerf/errors.hpp"
#include "edgenerf/eval.hpp"
#include "edgenerf/synthgen.hpp"
#include "helpers.hpp"

using namespace edgenerf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// First root of the signed distance along the ray, by bracketing and bisection.
double bisect_hit(const Primitive& p, const Ray& ray) {
  const int steps = 20000;
  double prev = ray.t_near;
  for (int i = 1; i <= steps; ++i) {
    const double t = ray.t_near + (ray.t_far - ray.t_near) * i / steps;
    if (p.signed_distance(ray.at(t)) <= 0.0) {
      double lo = prev, hi = t;
      for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        (p.signed_distance(ray.at(mid)) <= 0.0 ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = t;
  }
  return -1.0;
}

Ray ray_towards(Rng& rng, const Vec3& target, double spread) {
  Ray r;
  const Vec3 dir = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5).normalized();
  r.origin = target - 3.0 * dir;
  const Vec3 jitter = spread * Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
  r.direction = (target + jitter - r.origin).normalized();
  r.t_near = 0.0;
  r.t_far = 6.0;
  return r;
}

}  // namespace

TEST_CASE("a ray that misses everything sees the background") {
  SyntheticScene s = box_on_table_scene();
  s.background = Vec3(0.1, 0.2, 0.3);
  Ray r;
  r.origin = Vec3(0, 5, 0);
  r.direction = Vec3(0, 1, 0);
  r.t_far = 10.0;
  const TraceHit h = trace(s, r);
  CHECK(!h.hit);
  CHECK(h.color == s.background);
  CHECK(h.depth == 0.0);
  CHECK(h.normal.isZero(0.0));
}

TEST_CASE("face-on Lambertian plane") {
  SyntheticScene s;
  s.name = "plane";
  s.light.direction = Vec3(0, 0, 1);
  s.light.intensity = 1.0;
  s.ambient = 0.0;
  s.primitives = {Primitive::box(Vec3::Zero(), Vec3(0.5, 0.5, 0.1), Albedo{Vec3::Constant(0.5), Vec3::Constant(0.5), 0.0})};
  Ray r;
  r.origin = Vec3(0.1, -0.2, 2.0);
  r.direction = Vec3(0, 0, -1);
  r.t_far = 5.0;
  const TraceHit h = trace(s, r);
  REQUIRE(h.hit);
  CHECK((h.color - Vec3::Constant(0.5)).norm() < 1e-15);
  CHECK(h.depth == doctest::Approx(1.9).epsilon(1e-14));
  CHECK((h.normal - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("analytic intersections match bisection") {
  Rng rng(41);
  const SyntheticScene s = box_on_table_scene();
  for (const Primitive& p : s.primitives) {
    for (int n = 0; n < 60; ++n) {
      const Ray r = ray_towards(rng, p.center, p.kind == Primitive::Kind::Sphere ? 2.0 * p.radius : 1.0);
      SyntheticScene single = s;
      single.primitives = {p};
      const TraceHit h = trace(single, r);
      const double t = bisect_hit(p, r);
      CHECK(h.hit == (t > 0.0));
      if (!h.hit || t <= 0.0) continue;
      CHECK(std::abs(h.depth - t) <= 1e-9);
      CHECK(std::abs(h.normal.norm() - 1.0) <= 1e-12);
      CHECK(h.normal.dot(r.direction) <= 0.0);
    }
  }
}

TEST_CASE("intersect_sphere roots") {
  Ray r;
  r.origin = Vec3(0, 0, -5);
  r.direction = Vec3(0, 0, 1);
  CHECK(intersect_sphere(Vec3::Zero(), 1.0, r, 0.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(intersect_sphere(Vec3::Zero(), 1.0, r, 4.5) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(intersect_sphere(Vec3(3, 0, 0), 1.0, r, 0.0) < 0.0);
}

TEST_CASE("checker albedo alternates") {
  const Albedo a{Vec3::Zero(), Vec3::Ones(), 0.5};
  CHECK(a.at(Vec3(0.1, 0.1, 0.1)) != a.at(Vec3(0.6, 0.1, 0.1)));
  CHECK(a.at(Vec3(0.1, 0.1, 0.1)) == a.at(Vec3(0.6, 0.6, 0.1)));
  const Albedo flat{Vec3::Constant(0.3), Vec3::Ones(), 0.0};
  CHECK(flat.at(Vec3(0.6, 0.1, 0.1)) == Vec3::Constant(0.3));
}

TEST_CASE("generated dataset: counts, ground truth and determinism") {
  const auto a = testutil::temp_dir("synth_a"), b = testutil::temp_dir("synth_b");
  RigSpec rig;
  rig.size = 32;
  const Dataset ds = generate_dataset(box_on_table_scene(), rig, a);
  generate_dataset(box_on_table_scene(), rig, b);
  CHECK(ds.cameras.size() == 8);
  CHECK(ds.train.size() == 3);
  CHECK(ds.test.size() == 5);
  for (int v = 0; v < 8; ++v) {
    char name[16];
    std::snprintf(name, sizeof(name), "%03d", v);
    for (const auto& [dir, ext] : {std::pair{"rgb", ".png"}, std::pair{"depth", ".pfm"}, std::pair{"normal", ".pfm"}}) {
      const fs::path f = fs::path(dir) / (std::string(name) + ext);
      REQUIRE(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
  }
  CHECK(slurp(a / "cameras.txt") == slurp(b / "cameras.txt"));

  const Dataset loaded = load_dataset(a);
  CHECK(loaded.train == ds.train);
  CHECK(loaded.test == ds.test);
  REQUIRE(loaded.cameras.size() == ds.cameras.size());
  for (std::size_t v = 0; v < ds.cameras.size(); ++v) {
    CHECK((loaded.cameras[v].pose.rotation - ds.cameras[v].pose.rotation).norm() < 1e-12);
    CHECK(loaded.depths[v].width() == 32);
    std::size_t hits = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double d = ds.depths[v](x, y);
        CHECK(d >= 0.0);
        if (d > 0.0) {
          ++hits;
          CHECK(std::abs(ds.normals[v](x, y).norm() - 1.0) < 1e-6);  // f32 on disk
          CHECK(std::abs(loaded.depths[v](x, y) - d) <= 1e-6 * d);  // stored as f32
        } else {
          CHECK(ds.normals[v](x, y).isZero(0.0));
        }
      }
    CHECK(hits > 0);
  }
}

TEST_CASE("depth discontinuities coincide with detected edges") {
  const auto dir = testutil::temp_dir("synth_edges");
  const Dataset ds = generate_dataset(box_on_table_scene(), RigSpec{}, dir);
  std::size_t total = 0, covered = 0;
  for (std::size_t v = 0; v < ds.cameras.size(); ++v) {
    // occlusion jumps only; slanted surfaces stay below this threshold
    const BinaryMap jumps = discontinuity_mask(ds.depths[v], 0.25);
    const EdgeIndicatorMap e = compute_edge_indicator(ds.images[v], EdgeConfig{});
    for (int y = 0; y < jumps.height(); ++y)
      for (int x = 0; x < jumps.width(); ++x) {
        if (!jumps(x, y)) continue;
        ++total;
        covered += e(x, y) == 0;
      }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(covered) / total >= 0.7);
}

TEST_CASE("camera files round trip") {
  const auto dir = testutil::temp_dir("synth_cams");
  const auto cams = make_rig(box_on_table_scene(), RigSpec{});
  write_cameras(dir / "c.txt", cams);
  const auto back = read_cameras(dir / "c.txt");
  REQUIRE(back.size() == cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    CHECK(back[i].width == cams[i].width);
    CHECK(back[i].fx == doctest::Approx(cams[i].fx).epsilon(1e-15));
    CHECK((back[i].pose.translation - cams[i].pose.translation).norm() < 1e-14);
  }
  CHECK_THROWS_AS(read_cameras(dir / "missing.txt"), IoError);
  CHECK_THROWS_AS(load_dataset(dir / "nothing"), ConfigError);
}

TEST_CASE("baked field is dense inside primitives and empty outside") {
  const SyntheticScene s = box_on_table_scene();
  const FieldParams f = bake_scene_field(s, {33, 33, 33});
  const FieldOutput inside = query(f, {Vec3(0.42, -0.22, 0.26), Vec3::UnitZ()});
  const FieldOutput outside = query(f, {Vec3(0.0, 0.8, 0.0), Vec3::UnitZ()});
  CHECK(inside.density > 1e3);
  CHECK(outside.density < 1e-6);
}
