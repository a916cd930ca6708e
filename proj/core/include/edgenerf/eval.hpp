#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "edgenerf/field.hpp"
#include "edgenerf/geometry.hpp"
#include "edgenerf/image.hpp"
#include "edgenerf/synthgen.hpp"

namespace edgenerf {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

struct EvalConfig {
  int samples_per_ray = 128;
  double discontinuity_fraction = 0.01;  // of the scene diagonal
  int boundary_radius = 2;               // Chebyshev distance in pixels
  SsimParams ssim;
};

inline constexpr double kIdenticalPsnr = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) over all channels; kIdenticalPsnr for identical images.
double psnr(const RgbImage& a, const RgbImage& b);

// Mean SSIM over pixels and channels, Gaussian window truncated (and
// renormalized) at the image border.
double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& params = {});

// Pixels whose 3x3 neighbourhood depth range exceeds `threshold`.
BinaryMap discontinuity_mask(const DepthImage& depth, double threshold);

struct DepthErrors {
  double mae = 0.0;
  double boundary_mae = 0.0;
  std::size_t valid_pixels = 0;
  std::size_t boundary_pixels = 0;
};

// MAE over pixels with gt > 0; boundary MAE over those within `radius`
// (Chebyshev) of a mask pixel.
DepthErrors depth_metrics(const DepthImage& pred, const DepthImage& gt, const BinaryMap& mask, int radius = 2);

struct FieldView {
  RgbImage color;
  DepthImage depth;
  NormalImage normal;
};

// Midpoint sampling over the part of each ray inside the field's box.
FieldView render_view(const FieldParams& params, const Camera& camera, int samples_per_ray, bool normals = false);

struct ViewMetrics {
  int view = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_mae = 0.0;
  double boundary_depth_mae = 0.0;
  double render_ms = 0.0;
};

struct MetricsReport {
  std::string split;
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_depth_mae = 0.0;
  double mean_boundary_depth_mae = 0.0;
  double total_render_ms = 0.0;

  std::string to_text() const;
};

// Throws ConfigError when the field's box is not in view of every camera.
void check_field_matches_cameras(const FieldParams& params, const std::vector<Camera>& cameras);

// Renders every view of `split` ("test", "train" or "all"); writes report.txt,
// rgb/depth PNG/PFM per view into out_dir when it is not empty.
MetricsReport evaluate(const FieldParams& params, const Dataset& dataset, const std::string& split,
                       const EvalConfig& config, const std::filesystem::path& out_dir = {});

std::string format_psnr(double value);

}  // namespace edgenerf
