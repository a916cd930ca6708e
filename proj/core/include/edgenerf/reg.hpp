#pragma once

#include <array>
#include <span>
#include <vector>

#include "edgenerf/field.hpp"
#include "edgenerf/geometry.hpp"
#include "edgenerf/image.hpp"
#include "edgenerf/random.hpp"
#include "edgenerf/renderer.hpp"

namespace edgenerf {

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double lambda3 = 0.1;
  double tau1 = 1e-4;  // depth tolerance, world units
  double tau2 = 0.0;   // normal tolerance, squared-norm units

  // Throws InputDomainError for negative entries.
  void validate() const;
};

// How the per-patch depth/normal sums are normalized over the batch.
enum class PatchReduction { Sum, Mean };

// Global treats every pixel as non-edge (e = 1), i.e. plain local smoothing.
enum class EdgeGating { EdgeGuided, Global };

struct LossOptions {
  LossWeights weights;
  PatchReduction reduction = PatchReduction::Sum;
  EdgeGating gating = EdgeGating::EdgeGuided;
};

struct PatchRender {
  std::array<Vec3, 4> color{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, 4> gt_color{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<double, 4> depth{};
  std::array<Vec3, 4> normal{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<std::uint8_t, 4> indicator{};
};

struct LossBreakdown {
  double color = 0.0;
  double depth = 0.0;
  double normal = 0.0;
  double total = 0.0;
};

// Picks one image uniformly, then `count` top-left corners uniformly over the
// valid positions of that image. Consumes exactly 1 + 2 * count draws.
std::vector<PixelPatch> sample_patches(std::span<const EdgeIndicatorMap> edges, int count, Rng& rng);

// Mean over rays of the squared L2 colour error.
double photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> gt);

// Sum over patches of sum_i max(e_i |z_i - zbar| - tau1, 0); patches with no
// non-edge pixel contribute 0.
double depth_reg_loss(std::span<const PatchRender> patches, double tau1);

// Sum over patches of sum_i max(e_i |n_i - nbar|^2 - tau2, 0).
double normal_reg_loss(std::span<const PatchRender> patches, double tau2);

LossBreakdown total_loss(double color, double depth, double normal, const LossWeights& weights);

// d/dz of one patch's depth term, scaled by `scale`, accumulated into `dz`.
// Subgradients are 0 at the |.| and max kinks.
void depth_reg_upstream(const PatchRender& patch, double tau1, double scale, std::array<double, 4>& dz);
void normal_reg_upstream(const PatchRender& patch, double tau2, double scale, std::array<Vec3, 4>& dn);

// Every |.| and max argument the losses branch on, in a fixed order.
std::vector<double> kink_arguments(std::span<const PatchRender> patches, const LossOptions& options);

// Rays are stored four per patch in member order. A ray that misses the scene
// box has no samples and renders as empty space.
struct PatchBatch {
  std::vector<PixelPatch> patches;
  std::vector<Ray> rays;
  std::vector<RaySamples> samples;
  std::vector<Vec3> target;
};

struct BatchEvaluation {
  LossBreakdown loss;
  std::vector<PatchRender> renders;
};

// Forward only.
BatchEvaluation evaluate_batch(const FieldParams& params, const PatchBatch& batch, const LossOptions& options);

// Exact gradient of the total loss accumulated into `grad`. Rays are split
// into `workers` contiguous chunks whose gradients are summed in chunk order.
BatchEvaluation loss_backward(const FieldParams& params, const PatchBatch& batch, const LossOptions& options,
                              std::span<double> grad, int workers = 1);

}  // namespace edgenerf
