// Acceptance run: one PASS/FAIL line per criterion. Tolerances are pinned
// below. Usage: edgenerf_acceptance <work dir> <ablation config>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "edgenerf/ablation.hpp"
#include "edgenerf/config.hpp"
#include "edgenerf/edgemap.hpp"
#include "edgenerf/errors.hpp"
#include "edgenerf/eval.hpp"
#include "edgenerf/reg.hpp"
#include "edgenerf/renderer.hpp"
#include "edgenerf/synthgen.hpp"
#include "edgenerf/trainer.hpp"
#include "reference_canny.hpp"

namespace fs = std::filesystem;
using namespace edgenerf;

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kGradSeconds = 120.0;
constexpr double kPartitionTolerance = 1e-6;
constexpr double kConvergenceRatio = 1.8;
constexpr double kRenderingSeconds = 60.0;
constexpr int kRandomRays = 1000;
constexpr int kGatingPatches = 20000;
constexpr double kGatingSeconds = 60.0;
constexpr int kRandomMaps = 100;
constexpr double kTracerTolerance = 2.0 / 255.0;
constexpr int kTracerSamples = 512;
constexpr int kBakeResolution = 129;
constexpr double kPsnrGain = 0.2;
constexpr double kDepthMaeRatio = 0.9;
constexpr long kAblationIterations = 5000;
constexpr double kRunMilliseconds = 20.0 * 60.0 * 1000.0;
constexpr double kDepthCostRatio = 1.05;
constexpr long kDeterminismIterations = 300;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1. Analytic gradients against central differences on the voxel grid.
Outcome gradient_exactness() {
  GradcheckConfig config;
  config.trials = 20;
  const GradcheckReport g = gradcheck(config);
  const bool checked = g.color.checked > 0 && g.depth.checked > 0 && g.normal.checked > 0 && g.total.checked > 0;
  Outcome out;
  out.pass = g.finite && checked && g.max_rel_error() < kGradTolerance && g.seconds < kGradSeconds;
  out.detail = fmt("%d trials, max rel error L_c %.1e L_z %.1e L_n %.1e L %.1e, %zu coordinates, %zu excluded, %.1f s",
                   g.trials, g.color.max_rel_error, g.depth.max_rel_error, g.normal.max_rel_error,
                   g.total.max_rel_error, g.total.checked, g.total.excluded, g.seconds);
  return out;
}

// Gaussian bump on a constant floor, with closed-form optical depth.
struct Profile {
  double length, floor, amplitude, mean, width;
  Vec3 omega, phase;

  double sigma(double t) const {
    const double d = (t - mean) / width;
    return floor + amplitude * std::exp(-0.5 * d * d);
  }
  double optical_depth(double t) const {
    const double k = width * std::sqrt(0.5 * std::numbers::pi);
    const double s = std::numbers::sqrt2 * width;
    return floor * t + amplitude * k * (std::erf((t - mean) / s) - std::erf(-mean / s));
  }
  Vec3 color(double t) const {
    return Vec3(0.5 + 0.4 * std::sin(omega.x() * t + phase.x()), 0.5 + 0.4 * std::sin(omega.y() * t + phase.y()),
                0.5 + 0.4 * std::sin(omega.z() * t + phase.z()));
  }
};

Profile random_profile(Rng& rng) {
  Profile p;
  p.length = 1.0 + 3.0 * rng.uniform();
  p.floor = 0.05 * rng.uniform();
  p.amplitude = 0.5 + 4.5 * rng.uniform();
  p.mean = p.length * (0.2 + 0.6 * rng.uniform());
  p.width = p.length * (0.05 + 0.15 * rng.uniform());
  p.omega = Vec3(3.0 * rng.uniform(), 3.0 * rng.uniform(), 3.0 * rng.uniform());
  p.phase = Vec3(6.0 * rng.uniform(), 6.0 * rng.uniform(), 6.0 * rng.uniform());
  return p;
}

// Composite Simpson on the continuous integrals for colour and depth.
std::pair<Vec3, double> exact_integrals(const Profile& p) {
  constexpr int n = 20000;
  const double h = p.length / n;
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = p.sigma(t) * std::exp(-p.optical_depth(t));
    color += w * f * p.color(t);
    depth += w * f * t;
  }
  return {color * h / 3.0, depth * h / 3.0};
}

RenderResult composite_profile(const Profile& p, const RaySamples& samples) {
  std::vector<double> sigma(samples.size());
  std::vector<Vec3> color(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    sigma[k] = p.sigma(samples.t[k]);
    color[k] = p.color(samples.t[k]);
  }
  return composite(samples, sigma, color, {});
}

// 2. Partition of unity, monotone transmittance and first-order convergence.
Outcome rendering_invariants() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(2024);
  const std::vector<int> ks{32, 64, 128, 256, 512};
  std::vector<double> color_sq(ks.size(), 0.0), depth_sq(ks.size(), 0.0);
  double worst_partition = 0.0;
  bool monotone = true;
  for (int r = 0; r < kRandomRays; ++r) {
    const Profile p = random_profile(rng);
    Ray ray;
    ray.t_near = 0.0;
    ray.t_far = p.length;
    const auto [c_exact, z_exact] = exact_integrals(p);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const RenderResult res = composite_profile(p, sample_ray_midpoints(ray, ks[i]));
      color_sq[i] += (res.color - c_exact).squaredNorm();
      depth_sq[i] += (res.depth - z_exact) * (res.depth - z_exact);
    }
    // Invariants on stratified samples of random count.
    const int count = 2 + rng.uniform_index(255);
    const RaySamples samples = sample_ray(ray, count, rng, true);
    const RenderResult res = composite_profile(p, samples);
    double sum = 0.0, transmittance = 1.0;
    for (double w : res.weights) {
      if (w < 0.0) monotone = false;
      sum += w;
      const double next = transmittance - w;
      if (next > transmittance) monotone = false;
      transmittance = next;
    }
    worst_partition = std::max(worst_partition, std::abs(sum + res.residual_transmittance - 1.0));
  }
  double worst_ratio = std::numeric_limits<double>::infinity();
  std::string ratios;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const double rc = std::sqrt(color_sq[i] / color_sq[i + 1]);
    const double rz = std::sqrt(depth_sq[i] / depth_sq[i + 1]);
    worst_ratio = std::min({worst_ratio, rc, rz});
    ratios += fmt(" %d:%.2f/%.2f", ks[i], rc, rz);
  }
  const double seconds = seconds_since(start);
  Outcome out;
  out.pass = worst_partition <= kPartitionTolerance && monotone && worst_ratio >= kConvergenceRatio &&
             seconds < kRenderingSeconds;
  out.detail = fmt("%d rays, partition err %.1e, monotone %s, rms error ratio color/depth per doubling:%s, %.1f s",
                   kRandomRays, worst_partition, monotone ? "yes" : "no", ratios.c_str(), seconds);
  return out;
}

PatchRender random_patch(Rng& rng) {
  PatchRender p;
  for (int i = 0; i < 4; ++i) {
    p.depth[i] = 1.0 + 3.0 * rng.uniform();
    p.normal[i] = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5).normalized();
    p.indicator[i] = rng.uniform() < 0.5 ? 0 : 1;
  }
  return p;
}

// 3. Edge pixels never influence L_z/L_n, and in-tolerance patches cost nothing.
Outcome edge_gating() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(99);
  std::size_t perturbed = 0, changed = 0, leaked_gradient = 0, nonzero_in_tolerance = 0;
  for (int n = 0; n < kGatingPatches; ++n) {
    const double tau1 = n % 3 == 0 ? LossWeights{}.tau1 : 0.05 * rng.uniform();
    const double tau2 = n % 3 == 0 ? LossWeights{}.tau2 : 0.05 * rng.uniform();
    PatchRender p = random_patch(rng);
    PatchRender q = p;
    bool any_edge = false;
    for (int i = 0; i < 4; ++i) {
      if (p.indicator[i]) continue;
      any_edge = true;
      q.depth[i] += 10.0 * (rng.uniform() - 0.5);
      q.normal[i] = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
    }
    if (any_edge) {
      ++perturbed;
      const std::vector<PatchRender> a{p}, b{q};
      if (depth_reg_loss(a, tau1) != depth_reg_loss(b, tau1)) ++changed;
      if (normal_reg_loss(a, tau2) != normal_reg_loss(b, tau2)) ++changed;
      std::array<double, 4> dz{};
      std::array<Vec3, 4> dn{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
      depth_reg_upstream(q, tau1, 1.0, dz);
      normal_reg_upstream(q, tau2, 1.0, dn);
      for (int i = 0; i < 4; ++i)
        if (!q.indicator[i] && (dz[i] != 0.0 || !dn[i].isZero(0.0))) ++leaked_gradient;
    }

    // Non-edge pixels within half the tolerance of a common value; edge pixels arbitrary.
    PatchRender t = random_patch(rng);
    const double tz = 0.01 + 0.05 * rng.uniform();
    const double tn = 1e-4 + 0.05 * rng.uniform();
    const double z0 = 1.0 + 3.0 * rng.uniform();
    const Vec3 n0 = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5).normalized();
    const double spread = 0.4 * std::sqrt(tn) / std::sqrt(3.0);
    for (int i = 0; i < 4; ++i) {
      if (!t.indicator[i]) continue;
      t.depth[i] = z0 + 0.4 * tz * (2.0 * rng.uniform() - 1.0);
      t.normal[i] = n0 + spread * Vec3(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
    }
    const std::vector<PatchRender> tp{t};
    if (depth_reg_loss(tp, tz) != 0.0 || normal_reg_loss(tp, tn) != 0.0) ++nonzero_in_tolerance;
  }
  const double seconds = seconds_since(start);
  Outcome out;
  out.pass = perturbed >= 10000 && changed == 0 && leaked_gradient == 0 && nonzero_in_tolerance == 0 &&
             seconds < kGatingSeconds;
  out.detail = fmt("%zu perturbed patches: %zu loss changes, %zu edge gradients; %d in-tolerance patches: %zu "
                   "nonzero; %.1f s",
                   perturbed, changed, leaked_gradient, kGatingPatches, nonzero_in_tolerance, seconds);
  return out;
}

reference::Gray to_reference(const GrayImage& g) {
  reference::Gray r(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) r.at(x, y) = g(x, y);
  return r;
}

// 4. Edge detector and indicator post-processing.
Outcome edge_pipeline() {
  const CannyParams params;
  const EdgeConfig config;

  RgbImage flat(32, 32, Vec3(0.4, 0.5, 0.6));
  const EdgeIndicatorMap flat_e = compute_edge_indicator(flat, config);
  const bool constant_ok = flat_e.count_non_edge() == flat_e.map().size();

  GrayImage step(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) step(x, y) = x >= 16 ? 255.0 : 0.0;
  const GrayImage edges = canny(step, params);
  const reference::Gray ref = reference::canny(to_reference(step), params.sigma, params.low, params.high);
  bool single_line = true;
  std::size_t step_mismatch = 0;
  int line_column = -1;
  for (int y = 0; y < 32; ++y) {
    int on = 0;
    for (int x = 0; x < 32; ++x) {
      if (edges(x, y) != ref.at(x, y)) ++step_mismatch;
      if (edges(x, y) > 0.0) {
        ++on;
        if (line_column < 0) line_column = x;
        if (x != line_column) single_line = false;
      }
    }
    if (on != 1) single_line = false;
  }

  Rng rng(5);
  std::size_t map_mismatch = 0;
  for (int n = 0; n < kRandomMaps; ++n) {
    GrayImage strength(16, 16);
    for (double& v : strength.pixels()) v = std::floor(256.0 * rng.uniform());
    const double density = rng.uniform();
    for (double& v : strength.pixels())
      if (rng.uniform() > density) v = 0.0;
    const BinaryMap b = binarize(strength, config.tau_e);
    const BinaryMap d = dilate3x3(b);
    const EdgeIndicatorMap e = to_indicator(d);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const std::uint8_t expect_b = strength(x, y) >= config.tau_e ? 1 : 0;
        std::uint8_t expect_d = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            if (x + dx >= 0 && x + dx < 16 && y + dy >= 0 && y + dy < 16 && strength(x + dx, y + dy) >= config.tau_e)
              expect_d = 1;
        if (b(x, y) != expect_b || d(x, y) != expect_d || e(x, y) != 1 - expect_d) ++map_mismatch;
      }
  }

  Outcome out;
  out.pass = constant_ok && single_line && step_mismatch == 0 && map_mismatch == 0;
  out.detail = fmt("constant image all non-edge %s; step line at x=%d single %s, %zu pixels differ from reference; "
                   "%d random maps, %zu oracle mismatches",
                   constant_ok ? "yes" : "no", line_column, single_line ? "yes" : "no", step_mismatch, kRandomMaps,
                   map_mismatch);
  return out;
}

// 5. Baked field of the default scene against the analytic tracer.
Outcome tracer_consistency() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticScene scene = box_on_table_scene();
  const FieldParams field = bake_scene_field(scene, {kBakeResolution, kBakeResolution, kBakeResolution});
  const std::vector<Camera> cameras = make_rig(scene, RigSpec{});
  double worst = 0.0, worst_pixel = 0.0, lowest_psnr = std::numeric_limits<double>::infinity();
  std::string per_view;
  for (const Camera& camera : cameras) {
    const RenderedView traced = trace_view(scene, camera);
    const FieldView rendered = render_view(field, camera, kTracerSamples);
    Vec3 channel_error = Vec3::Zero();
    for (std::size_t i = 0; i < traced.color.size(); ++i) {
      const Vec3 diff = (rendered.color.pixels()[i] - traced.color.pixels()[i]).cwiseAbs();
      channel_error += diff;
      worst_pixel = std::max(worst_pixel, diff.maxCoeff());
    }
    const double view_error = channel_error.maxCoeff() / static_cast<double>(traced.color.size());
    worst = std::max(worst, view_error);
    lowest_psnr = std::min(lowest_psnr, psnr(rendered.color, traced.color));
    per_view += fmt(" %.2f", view_error * 255.0);
  }
  Outcome out;
  out.pass = worst <= kTracerTolerance;
  out.detail = fmt("%zu views, per-view max-channel mean abs error (x255):%s; min psnr %.1f dB, worst single "
                   "pixel %.3f; %.1f s",
                   cameras.size(), per_view.c_str(), lowest_psnr, worst_pixel, seconds_since(start));
  return out;
}

std::vector<char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Two deterministic runs compared byte for byte.
Outcome determinism(const Config& base, const fs::path& data, const fs::path& work) {
  TrainConfig train = base.train;
  train.iterations = kDeterminismIterations;
  train.checkpoint_every = 100;
  train.log_every = 10;
  train.deterministic = true;
  train.workers = 4;
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  run_training(train, base.edges, data, a);
  run_training(train, base.edges, data, b);
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    const fs::path other = b / entry.path().filename();
    if (!fs::exists(other) || file_bytes(entry.path()) != file_bytes(other)) ++differing;
  }
  std::size_t files_b = std::distance(fs::directory_iterator(b), fs::directory_iterator{});
  Outcome out;
  out.pass = files > 0 && files == files_b && differing == 0;
  out.detail = fmt("%ld iterations twice: %zu files, %zu differ", kDeterminismIterations, files, differing);
  return out;
}

void report(int number, const char* name, const Outcome& outcome) {
  std::printf("criterion %d %s: %s  %s\n", number, name, outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
  std::fflush(stdout);
}

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: edgenerf_acceptance <work dir> <ablation config>\n");
    return 2;
  }
  const fs::path work = argv[1];
  fs::create_directories(work);
  const Config config = load_config(argv[2]);

  std::vector<bool> passed;
  auto record = [&](int number, const char* name, const Outcome& outcome) {
    report(number, name, outcome);
    passed.push_back(outcome.pass);
  };

  record(1, "gradient exactness", guarded(gradient_exactness));
  record(2, "volume rendering invariants", guarded(rendering_invariants));
  record(3, "edge gating exactness", guarded(edge_gating));
  record(4, "edge pipeline", guarded(edge_pipeline));
  record(5, "renderer-tracer consistency", guarded(tracer_consistency));

  const fs::path data = work / "box_on_table";
  Outcome ablation_a, ablation_b, cost;
  try {
    fs::remove_all(data);
    generate_dataset(box_on_table_scene(), RigSpec{}, data);
    const fs::path out_dir = work / "ablation";
    fs::remove_all(out_dir);
    const AblationReport table = run_ablation(config, data, out_dir, default_ablation_rows(config));
    std::printf("%s", table.table().c_str());
    const AblationResult& base = table.row("baseline");
    const AblationResult& full = table.row("full");
    const AblationResult& depth = table.row("depth");
    const AblationResult& normal = table.row("normal");
    const AblationResult& global = table.row("depth-global");
    bool runs_ok = config.train.iterations >= kAblationIterations && table.draws_consistent;
    for (const AblationResult& r : table.results) runs_ok = runs_ok && r.train_ms < kRunMilliseconds;
    const double gain = full.metrics.mean_psnr - base.metrics.mean_psnr;
    const double mae_ratio = full.metrics.mean_depth_mae / base.metrics.mean_depth_mae;
    ablation_a.pass = runs_ok && gain >= kPsnrGain && mae_ratio <= kDepthMaeRatio;
    ablation_a.detail = fmt("%ld iterations; full %.3f dB vs baseline %.3f dB (gain %.3f), depth mae %.4f vs %.4f "
                            "(ratio %.3f)",
                            config.train.iterations, full.metrics.mean_psnr, base.metrics.mean_psnr, gain,
                            full.metrics.mean_depth_mae, base.metrics.mean_depth_mae, mae_ratio);
    ablation_b.pass = runs_ok && depth.metrics.mean_boundary_depth_mae <= global.metrics.mean_boundary_depth_mae;
    ablation_b.detail = fmt("boundary depth mae edge-guided %.4f vs global %.4f",
                            depth.metrics.mean_boundary_depth_mae, global.metrics.mean_boundary_depth_mae);
    const double depth_ratio = depth.train_ms / base.train_ms;
    const double normal_ratio = normal.train_ms / base.train_ms;
    cost.pass = depth_ratio < kDepthCostRatio && normal_ratio > depth_ratio;
    cost.detail = fmt("wall time ratio depth %.3f, normal %.3f", depth_ratio, normal_ratio);
  } catch (const std::exception& e) {
    ablation_a = ablation_b = cost = {false, std::string("threw: ") + e.what()};
  }
  Outcome ablation{ablation_a.pass && ablation_b.pass, "(a) " + ablation_a.detail + "; (b) " + ablation_b.detail};
  record(6, "desk-scale ablation", ablation);
  record(7, "cost asymmetry", cost);
  record(8, "determinism", guarded([&] { return determinism(config, data, work); }));

  const auto count = std::count(passed.begin(), passed.end(), true);
  std::printf("%ld of %zu criteria passed\n", static_cast<long>(count), passed.size());
  return count == static_cast<long>(passed.size()) ? 0 : 1;
}
