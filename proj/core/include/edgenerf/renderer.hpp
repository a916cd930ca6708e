#pragma once

#include <span>
#include <vector>

#include "edgenerf/field.hpp"
#include "edgenerf/geometry.hpp"
#include "edgenerf/random.hpp"

namespace edgenerf {

// Sample distances t_k (strictly increasing) and segment lengths; the last
// segment closes against the ray's t_far.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;

  std::size_t size() const { return t.size(); }
};

RaySamples make_samples(std::vector<double> t, double t_far);

// Stratified: one uniform draw per equal bin of [t_near, t_far].
// Otherwise bin midpoints (no draws).
RaySamples sample_ray(const Ray& ray, int count, Rng& rng, bool stratified);
RaySamples sample_ray_midpoints(const Ray& ray, int count);

struct RenderResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  Vec3 normal = Vec3::Zero();  // composited, not renormalized
  std::vector<double> weights;
  double residual_transmittance = 1.0;
  double opacity = 0.0;
};

// Alpha compositing of per-sample values. `normals` may be empty.
RenderResult composite(const RaySamples& samples, std::span<const double> density, std::span<const Vec3> color,
                       std::span<const Vec3> normals);

// Per-sample normal -grad/|grad|, zero when |grad| < 1e-12.
Vec3 density_normal(const Vec3& density_gradient);

struct RenderOptions {
  bool normals = false;
};

// Forward pass plus everything the backward pass reuses.
struct RayTape {
  Ray ray;
  RaySamples samples;
  bool with_normals = false;
  std::vector<PointEval> points;
  std::vector<Vec3> normals;
  std::vector<double> transmittance;  // T_k before sample k
  RenderResult result;
};

RayTape render_recorded(const FieldParams& params, const Ray& ray, const RaySamples& samples,
                        RenderOptions options = {});
RenderResult render(const FieldParams& params, const Ray& ray, const RaySamples& samples,
                    RenderOptions options = {});

struct RenderUpstream {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  Vec3 normal = Vec3::Zero();

  bool is_zero() const { return color.isZero(0.0) && depth == 0.0 && normal.isZero(0.0); }
};

// Accumulates the exact gradient of upstream . (C, z, n) into `grad`.
void render_backward(const FieldParams& params, const RayTape& tape, const RenderUpstream& upstream,
                     std::span<double> grad);
void render_backward(const FieldParams& params, const Ray& ray, const RaySamples& samples,
                     const RenderUpstream& upstream, std::span<double> grad, RenderOptions options = {});

}  // namespace edgenerf
