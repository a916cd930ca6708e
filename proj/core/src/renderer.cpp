#include "edgenerf/renderer.hpp"

#include <cmath>

#include "edgenerf/errors.hpp"

namespace edgenerf {

RaySamples make_samples(std::vector<double> t, double t_far) {
  RaySamples s;
  s.delta.resize(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double next = k + 1 < t.size() ? t[k + 1] : t_far;
    s.delta[k] = next - t[k];
    if (!(s.delta[k] > 0.0)) throw InputDomainError("ray samples must be strictly increasing and below t_far");
  }
  s.t = std::move(t);
  return s;
}

RaySamples sample_ray(const Ray& ray, int count, Rng& rng, bool stratified) {
  if (count < 2) throw InputDomainError("sample_ray: need at least 2 samples");
  const double bin = (ray.t_far - ray.t_near) / count;
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) {
    const double offset = stratified ? rng.uniform() : 0.5;
    t[k] = ray.t_near + (k + offset) * bin;
  }
  return make_samples(std::move(t), ray.t_far);
}

RaySamples sample_ray_midpoints(const Ray& ray, int count) {
  Rng unused(0);
  return sample_ray(ray, count, unused, false);
}

Vec3 density_normal(const Vec3& density_gradient) {
  const double norm = density_gradient.norm();
  if (norm < 1e-12) return Vec3::Zero();
  return -density_gradient / norm;
}

RenderResult composite(const RaySamples& samples, std::span<const double> density, std::span<const Vec3> color,
                       std::span<const Vec3> normals) {
  const std::size_t n = samples.size();
  RenderResult r;
  r.weights.resize(n);
  double transmittance = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double tau = density[k] * samples.delta[k];
    const double alpha = -std::expm1(-tau);
    const double w = transmittance * alpha;
    r.weights[k] = w;
    r.color += w * color[k];
    r.depth += w * samples.t[k];
    if (!normals.empty()) r.normal += w * normals[k];
    r.opacity += w;
    transmittance *= std::exp(-tau);
  }
  r.residual_transmittance = transmittance;
  return r;
}

RayTape render_recorded(const FieldParams& params, const Ray& ray, const RaySamples& samples, RenderOptions options) {
  RayTape tape;
  tape.ray = ray;
  tape.samples = samples;
  tape.with_normals = options.normals;
  const std::size_t n = samples.size();
  tape.points.resize(n);
  std::vector<double> density(n);
  std::vector<Vec3> color(n);
  if (options.normals) tape.normals.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    tape.points[k] = evaluate(params, {ray.at(samples.t[k]), ray.direction}, options.normals);
    density[k] = tape.points[k].output.density;
    color[k] = tape.points[k].output.color;
    if (options.normals) tape.normals[k] = density_normal(tape.points[k].density_gradient);
  }
  tape.result = composite(samples, density, color, tape.normals);
  tape.transmittance.resize(n);
  double transmittance = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    tape.transmittance[k] = transmittance;
    transmittance *= std::exp(-density[k] * samples.delta[k]);
  }
  return tape;
}

RenderResult render(const FieldParams& params, const Ray& ray, const RaySamples& samples, RenderOptions options) {
  return render_recorded(params, ray, samples, options).result;
}

void render_backward(const FieldParams& params, const RayTape& tape, const RenderUpstream& up, std::span<double> grad) {
  if (up.is_zero()) return;
  const std::size_t n = tape.samples.size();
  const bool use_normals = tape.with_normals && !up.normal.isZero(0.0);
  const auto& w = tape.result.weights;

  // g_k = dL/dw_k
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = up.color.dot(tape.points[k].output.color) + up.depth * tape.samples.t[k];
    if (use_normals) g[k] += up.normal.dot(tape.normals[k]);
  }

  // dL/dsigma_k = delta_k * (g_k T_{k+1} - sum_{j>k} g_j w_j)
  double suffix = 0.0;
  for (std::size_t idx = n; idx-- > 0;) {
    const PointEval& p = tape.points[idx];
    const double tau = p.output.density * tape.samples.delta[idx];
    const double t_next = tape.transmittance[idx] * std::exp(-tau);
    FieldUpstream fu;
    fu.density = tape.samples.delta[idx] * (g[idx] * t_next - suffix);
    fu.color = w[idx] * up.color;
    if (use_normals) {
      const double norm = p.density_gradient.norm();
      if (norm >= 1e-12) {
        const Vec3 d_normal = w[idx] * up.normal;
        const Vec3 unit = p.density_gradient / norm;
        fu.density_gradient = -(d_normal - d_normal.dot(unit) * unit) / norm;
      }
    }
    suffix += g[idx] * w[idx];
    if (p.inside) backward(params, {tape.ray.at(tape.samples.t[idx]), tape.ray.direction}, p, fu, grad);
  }
}

void render_backward(const FieldParams& params, const Ray& ray, const RaySamples& samples, const RenderUpstream& up,
                     std::span<double> grad, RenderOptions options) {
  render_backward(params, render_recorded(params, ray, samples, options), up, grad);
}

}  // namespace edgenerf
