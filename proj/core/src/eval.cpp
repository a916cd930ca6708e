#include "edgenerf/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "edgenerf/errors.hpp"
#include "edgenerf/image_io.hpp"
#include "edgenerf/renderer.hpp"

namespace edgenerf {
namespace {

namespace fs = std::filesystem;

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Weighted local mean with the window truncated at the border.
Image<double> local_mean(const Image<double>& src, const std::vector<double>& w) {
  const int r = static_cast<int>(w.size()) / 2;
  const int width = src.width(), height = src.height();
  Image<double> tmp(width, height), out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        if (x + i < 0 || x + i >= width) continue;
        acc += w[i + r] * src(x + i, y);
        norm += w[i + r];
      }
      tmp(x, y) = acc / norm;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        if (y + i < 0 || y + i >= height) continue;
        acc += w[i + r] * tmp(x, y + i);
        norm += w[i + r];
      }
      out(x, y) = acc / norm;
    }
  }
  return out;
}

std::string view_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d.%s", index, ext);
  return buf;
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw InputDomainError("psnr: image sizes differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a.pixels()[i] - b.pixels()[i]).squaredNorm();
  const double mse = sum / (3.0 * static_cast<double>(a.size()));
  if (mse == 0.0) return kIdenticalPsnr;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& p) {
  if (a.width() != b.width() || a.height() != b.height()) throw InputDomainError("ssim: image sizes differ");
  const auto w = gaussian_window(p.window, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    Image<double> x(a.width(), a.height()), y(a.width(), a.height());
    Image<double> xx(a.width(), a.height()), yy(a.width(), a.height()), xy(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double u = a.pixels()[i][ch], v = b.pixels()[i][ch];
      x.pixels()[i] = u;
      y.pixels()[i] = v;
      xx.pixels()[i] = u * u;
      yy.pixels()[i] = v * v;
      xy.pixels()[i] = u * v;
    }
    const auto mx = local_mean(x, w), my = local_mean(y, w);
    const auto mxx = local_mean(xx, w), myy = local_mean(yy, w), mxy = local_mean(xy, w);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double ux = mx.pixels()[i], uy = my.pixels()[i];
      const double vx = mxx.pixels()[i] - ux * ux;
      const double vy = myy.pixels()[i] - uy * uy;
      const double cxy = mxy.pixels()[i] - ux * uy;
      total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
  }
  return total / (3.0 * static_cast<double>(a.size()));
}

BinaryMap discontinuity_mask(const DepthImage& depth, double threshold) {
  const int w = depth.width(), h = depth.height();
  BinaryMap mask(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double lo = depth(x, y), hi = depth(x, y);
      for (int ny = std::max(0, y - 1); ny <= std::min(h - 1, y + 1); ++ny) {
        for (int nx = std::max(0, x - 1); nx <= std::min(w - 1, x + 1); ++nx) {
          lo = std::min(lo, depth(nx, ny));
          hi = std::max(hi, depth(nx, ny));
        }
      }
      mask(x, y) = hi - lo > threshold ? 1 : 0;
    }
  }
  return mask;
}

DepthErrors depth_metrics(const DepthImage& pred, const DepthImage& gt, const BinaryMap& mask, int radius) {
  if (pred.width() != gt.width() || pred.height() != gt.height() || mask.width() != gt.width() ||
      mask.height() != gt.height()) {
    throw InputDomainError("depth_metrics: size mismatch");
  }
  const int w = gt.width(), h = gt.height();
  DepthErrors e;
  double sum = 0.0, boundary_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!(gt(x, y) > 0.0)) continue;
      const double err = std::abs(pred(x, y) - gt(x, y));
      sum += err;
      ++e.valid_pixels;
      bool near = false;
      for (int ny = std::max(0, y - radius); ny <= std::min(h - 1, y + radius) && !near; ++ny)
        for (int nx = std::max(0, x - radius); nx <= std::min(w - 1, x + radius); ++nx)
          if (mask(nx, ny)) {
            near = true;
            break;
          }
      if (near) {
        boundary_sum += err;
        ++e.boundary_pixels;
      }
    }
  }
  if (e.valid_pixels) e.mae = sum / static_cast<double>(e.valid_pixels);
  if (e.boundary_pixels) e.boundary_mae = boundary_sum / static_cast<double>(e.boundary_pixels);
  return e;
}

FieldView render_view(const FieldParams& params, const Camera& camera, int samples_per_ray, bool normals) {
  FieldView v{RgbImage(camera.width, camera.height, Vec3::Zero()), DepthImage(camera.width, camera.height, 0.0),
              NormalImage(camera.width, camera.height, Vec3::Zero())};
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const auto ray = clip_to_box(pixel_to_ray(camera, x, y), params.bounds());
      if (!ray) continue;
      const RenderResult r = render(params, *ray, sample_ray_midpoints(*ray, samples_per_ray), {normals});
      v.color(x, y) = r.color;
      v.depth(x, y) = r.depth;
      v.normal(x, y) = r.normal;
    }
  }
  return v;
}

void check_field_matches_cameras(const FieldParams& params, const std::vector<Camera>& cameras) {
  const Vec3 center = params.bounds().center();
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& c = cameras[i];
    const Vec3 local = c.pose.rotation.transpose() * (center - c.pose.translation);
    const Vec2 px = project(c, center);
    const double dist = (center - c.position()).norm();
    if (local.z() <= 0.0 || px.x() < 0.0 || px.y() < 0.0 || px.x() > c.width || px.y() > c.height ||
        dist < c.near || dist > c.far) {
      throw ConfigError("field bounds are not in view of camera " + std::to_string(i) +
                        "; checkpoint and dataset do not belong together");
    }
  }
}

MetricsReport evaluate(const FieldParams& params, const Dataset& dataset, const std::string& split,
                       const EvalConfig& config, const fs::path& out_dir) {
  check_field_matches_cameras(params, dataset.cameras);
  std::vector<int> views;
  if (split == "test") {
    views = dataset.test;
  } else if (split == "train") {
    views = dataset.train;
  } else if (split == "all") {
    for (int i = 0; i < static_cast<int>(dataset.cameras.size()); ++i) views.push_back(i);
  } else {
    throw ConfigError("unknown split '" + split + "'");
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir / "rgb");
    fs::create_directories(out_dir / "depth");
  }
  MetricsReport report;
  report.split = split;
  const double threshold = config.discontinuity_fraction * dataset.bounds.diagonal();
  for (int v : views) {
    const auto start = std::chrono::steady_clock::now();
    const FieldView view = render_view(params, dataset.cameras[v], config.samples_per_ray);
    const auto stop = std::chrono::steady_clock::now();
    ViewMetrics m;
    m.view = v;
    m.render_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    m.psnr = psnr(view.color, dataset.images[v]);
    m.ssim = ssim(view.color, dataset.images[v], config.ssim);
    if (!dataset.depths[v].empty()) {
      const DepthErrors e = depth_metrics(view.depth, dataset.depths[v], discontinuity_mask(dataset.depths[v], threshold),
                                          config.boundary_radius);
      m.depth_mae = e.mae;
      m.boundary_depth_mae = e.boundary_mae;
    }
    report.views.push_back(m);
    if (!out_dir.empty()) {
      write_png_rgb(out_dir / "rgb" / view_name(v, "png"), view.color);
      write_pfm(out_dir / "depth" / view_name(v, "pfm"), view.depth);
    }
  }
  if (!report.views.empty()) {
    const double n = static_cast<double>(report.views.size());
    for (const ViewMetrics& m : report.views) {
      report.mean_psnr += m.psnr / n;
      report.mean_ssim += m.ssim / n;
      report.mean_depth_mae += m.depth_mae / n;
      report.mean_boundary_depth_mae += m.boundary_depth_mae / n;
      report.total_render_ms += m.render_ms;
    }
  }
  if (!out_dir.empty()) {
    std::ofstream out(out_dir / "report.txt");
    out << report.to_text();
    if (!out) throw IoError("failed writing report.txt");
  }
  return report;
}

std::string format_psnr(double value) {
  if (std::isinf(value)) return "identical";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "split: " << split << '\n';
  out << "views: " << views.size() << '\n';
  for (const ViewMetrics& m : views) {
    out << "view " << m.view << ": psnr=" << format_psnr(m.psnr) << " ssim=" << m.ssim << " depth_mae=" << m.depth_mae
        << " boundary_depth_mae=" << m.boundary_depth_mae << " render_ms=" << m.render_ms << '\n';
  }
  out << "mean_psnr: " << format_psnr(mean_psnr) << '\n';
  out << "mean_ssim: " << mean_ssim << '\n';
  out << "mean_depth_mae: " << mean_depth_mae << '\n';
  out << "mean_boundary_depth_mae: " << mean_boundary_depth_mae << '\n';
  out << "total_render_ms: " << total_render_ms << '\n';
  return out.str();
}

}  // namespace edgenerf
