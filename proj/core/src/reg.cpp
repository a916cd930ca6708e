#include "edgenerf/reg.hpp"

#include <cmath>
#include <thread>

#include "edgenerf/errors.hpp"

namespace edgenerf {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

int non_edge_count(const PatchRender& p) { return p.indicator[0] + p.indicator[1] + p.indicator[2] + p.indicator[3]; }

double mean_depth(const PatchRender& p, int count) {
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += p.indicator[i] * p.depth[i];
  return sum / count;
}

Vec3 mean_normal(const PatchRender& p, int count) {
  Vec3 sum = Vec3::Zero();
  for (int i = 0; i < 4; ++i) sum += p.indicator[i] * p.normal[i];
  return sum / count;
}

template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::jthread> threads;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
}

struct RenderedBatch {
  std::vector<RayTape> tapes;
  BatchEvaluation eval;
  double patch_scale = 1.0;
};

RenderedBatch render_batch(const FieldParams& params, const PatchBatch& batch, const LossOptions& options,
                           int workers) {
  const std::size_t rays = batch.rays.size();
  if (rays != 4 * batch.patches.size() || batch.samples.size() != rays || batch.target.size() != rays) {
    throw InputDomainError("patch batch: expected four rays, sample sets and targets per patch");
  }
  RenderedBatch out;
  out.tapes.resize(rays);
  const RenderOptions render_options{options.weights.lambda3 > 0.0};
  parallel_chunks(rays, workers, [&](int, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      out.tapes[r] = render_recorded(params, batch.rays[r], batch.samples[r], render_options);
    }
  });

  auto& renders = out.eval.renders;
  renders.resize(batch.patches.size());
  std::vector<Vec3> colors(rays);
  for (std::size_t m = 0; m < batch.patches.size(); ++m) {
    for (int i = 0; i < 4; ++i) {
      const RenderResult& r = out.tapes[4 * m + i].result;
      renders[m].color[i] = r.color;
      renders[m].gt_color[i] = batch.target[4 * m + i];
      renders[m].depth[i] = r.depth;
      renders[m].normal[i] = r.normal;
      renders[m].indicator[i] = options.gating == EdgeGating::Global ? 1 : batch.patches[m].indicator[i];
      colors[4 * m + i] = r.color;
    }
  }
  out.patch_scale = options.reduction == PatchReduction::Mean && !batch.patches.empty()
                        ? 1.0 / static_cast<double>(batch.patches.size())
                        : 1.0;
  const double lc = photometric_loss(colors, batch.target);
  const double lz = out.patch_scale * depth_reg_loss(renders, options.weights.tau1);
  const double ln = options.weights.lambda3 > 0.0 ? out.patch_scale * normal_reg_loss(renders, options.weights.tau2) : 0.0;
  out.eval.loss = total_loss(lc, lz, ln, options.weights);
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 || tau1 < 0.0 || tau2 < 0.0) {
    throw InputDomainError("loss weights and tolerances must be non-negative");
  }
}

std::vector<PixelPatch> sample_patches(std::span<const EdgeIndicatorMap> edges, int count, Rng& rng) {
  if (count < 1) throw InputDomainError("sample_patches: need at least one patch");
  if (edges.empty()) throw InputDomainError("sample_patches: no training images");
  const int image = rng.uniform_index(static_cast<int>(edges.size()));
  const EdgeIndicatorMap& map = edges[image];
  if (map.width() < 2 || map.height() < 2) throw InputDomainError("sample_patches: image smaller than 2x2");
  std::vector<PixelPatch> patches;
  patches.reserve(count);
  for (int m = 0; m < count; ++m) {
    const int x = rng.uniform_index(map.width() - 1);
    const int y = rng.uniform_index(map.height() - 1);
    patches.push_back(make_patch(map, image, {x, y}));
  }
  return patches;
}

double photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> gt) {
  if (rendered.size() != gt.size()) throw InputDomainError("photometric_loss: size mismatch");
  if (rendered.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < rendered.size(); ++r) sum += (rendered[r] - gt[r]).squaredNorm();
  return sum / static_cast<double>(rendered.size());
}

double depth_reg_loss(std::span<const PatchRender> patches, double tau1) {
  double loss = 0.0;
  for (const PatchRender& p : patches) {
    const int count = non_edge_count(p);
    if (count == 0) continue;
    const double zbar = mean_depth(p, count);
    for (int i = 0; i < 4; ++i) loss += std::max(p.indicator[i] * std::abs(p.depth[i] - zbar) - tau1, 0.0);
  }
  return loss;
}

double normal_reg_loss(std::span<const PatchRender> patches, double tau2) {
  double loss = 0.0;
  for (const PatchRender& p : patches) {
    const int count = non_edge_count(p);
    if (count == 0) continue;
    const Vec3 nbar = mean_normal(p, count);
    for (int i = 0; i < 4; ++i) loss += std::max(p.indicator[i] * (p.normal[i] - nbar).squaredNorm() - tau2, 0.0);
  }
  return loss;
}

LossBreakdown total_loss(double color, double depth, double normal, const LossWeights& w) {
  return {color, depth, normal, w.lambda1 * color + w.lambda2 * depth + w.lambda3 * normal};
}

void depth_reg_upstream(const PatchRender& p, double tau1, double scale, std::array<double, 4>& dz) {
  const int count = non_edge_count(p);
  if (count == 0) return;
  const double zbar = mean_depth(p, count);
  for (int i = 0; i < 4; ++i) {
    if (!p.indicator[i]) continue;
    const double u = p.depth[i] - zbar;
    if (!(std::abs(u) - tau1 > 0.0)) continue;
    const double s = scale * sign(u);
    for (int j = 0; j < 4; ++j) dz[j] += s * ((i == j ? 1.0 : 0.0) - p.indicator[j] / static_cast<double>(count));
  }
}

void normal_reg_upstream(const PatchRender& p, double tau2, double scale, std::array<Vec3, 4>& dn) {
  const int count = non_edge_count(p);
  if (count == 0) return;
  const Vec3 nbar = mean_normal(p, count);
  for (int i = 0; i < 4; ++i) {
    if (!p.indicator[i]) continue;
    const Vec3 diff = p.normal[i] - nbar;
    if (!(diff.squaredNorm() - tau2 > 0.0)) continue;
    const Vec3 g = 2.0 * scale * diff;
    for (int j = 0; j < 4; ++j) dn[j] += ((i == j ? 1.0 : 0.0) - p.indicator[j] / static_cast<double>(count)) * g;
  }
}

std::vector<double> kink_arguments(std::span<const PatchRender> patches, const LossOptions& options) {
  std::vector<double> args;
  for (const PatchRender& p : patches) {
    const int count = non_edge_count(p);
    if (count == 0) continue;
    const double zbar = mean_depth(p, count);
    const Vec3 nbar = mean_normal(p, count);
    for (int i = 0; i < 4; ++i) {
      if (!p.indicator[i]) continue;
      const double u = p.depth[i] - zbar;
      args.push_back(u);
      args.push_back(std::abs(u) - options.weights.tau1);
      args.push_back((p.normal[i] - nbar).squaredNorm() - options.weights.tau2);
    }
  }
  return args;
}

BatchEvaluation evaluate_batch(const FieldParams& params, const PatchBatch& batch, const LossOptions& options) {
  return render_batch(params, batch, options, 1).eval;
}

BatchEvaluation loss_backward(const FieldParams& params, const PatchBatch& batch, const LossOptions& options,
                              std::span<double> grad, int workers) {
  if (grad.size() != params.size()) throw InputDomainError("loss_backward: gradient buffer has the wrong size");
  RenderedBatch rendered = render_batch(params, batch, options, workers);
  const LossWeights& w = options.weights;
  const std::size_t rays = batch.rays.size();
  const auto& renders = rendered.eval.renders;

  std::vector<RenderUpstream> upstream(rays);
  const double color_scale = rays > 0 ? 2.0 * w.lambda1 / static_cast<double>(rays) : 0.0;
  for (std::size_t r = 0; r < rays; ++r) {
    upstream[r].color = color_scale * (rendered.tapes[r].result.color - batch.target[r]);
  }
  for (std::size_t m = 0; m < renders.size(); ++m) {
    if (w.lambda2 > 0.0) {
      std::array<double, 4> dz{};
      depth_reg_upstream(renders[m], w.tau1, w.lambda2 * rendered.patch_scale, dz);
      for (int i = 0; i < 4; ++i) upstream[4 * m + i].depth += dz[i];
    }
    if (w.lambda3 > 0.0) {
      std::array<Vec3, 4> dn{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
      normal_reg_upstream(renders[m], w.tau2, w.lambda3 * rendered.patch_scale, dn);
      for (int i = 0; i < 4; ++i) upstream[4 * m + i].normal += dn[i];
    }
  }

  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(rays, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < rays; ++r) render_backward(params, rendered.tapes[r], upstream[r], grad);
  } else {
    std::vector<std::vector<double>> partial(workers, std::vector<double>(params.size(), 0.0));
    parallel_chunks(rays, workers, [&](int worker, std::size_t begin, std::size_t end) {
      for (std::size_t r = begin; r < end; ++r) render_backward(params, rendered.tapes[r], upstream[r], partial[worker]);
    });
    for (const auto& part : partial)
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += part[i];
  }
  return std::move(rendered.eval);
}

}  // namespace edgenerf
