#include <benchmark/benchmark.h>

#include "edgenerf/reg.hpp"

using namespace edgenerf;

namespace {

// 32 patches seen by a camera looking down -z at the unit box.
struct Setup {
  FieldParams params = FieldParams::voxel_grid({{65, 65, 65}, Aabb{}});
  PatchBatch batch;

  Setup() {
    Rng rng(2);
    for (double& v : params.values()) v = -2.0 + 4.0 * rng.uniform();
    Camera cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 80.0;
    cam.cx = cam.cy = 32.0;
    cam.near = 0.1;
    cam.far = 10.0;
    cam.pose = look_at(Vec3(0.3, 0.5, 3.0), Vec3::Zero(), Vec3::UnitY());
    const std::vector<EdgeIndicatorMap> edges{EdgeIndicatorMap::all_non_edge(64, 64)};
    batch.patches = sample_patches(edges, 32, rng);
    for (const PixelPatch& p : batch.patches) {
      for (const PixelCoord& px : p.pixels) {
        const Ray ray = *clip_to_box(pixel_to_ray(cam, px.x, px.y), Aabb{});
        batch.rays.push_back(ray);
        batch.samples.push_back(sample_ray(ray, 64, rng, true));
        batch.target.push_back(Vec3(0.5, 0.5, 0.5));
      }
    }
  }
};

void BM_LossBackward(benchmark::State& state) {
  static const Setup setup;
  LossOptions options;
  options.weights.lambda2 = state.range(0) ? 0.1 : 0.0;
  options.weights.lambda3 = state.range(1) ? 0.1 : 0.0;
  std::vector<double> grad(setup.params.size(), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_backward(setup.params, setup.batch, options, grad));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(setup.batch.rays.size()));
}

}  // namespace

// baseline, +depth, +normal, +both
BENCHMARK(BM_LossBackward)->Args({0, 0})->Args({1, 0})->Args({0, 1})->Args({1, 1})->Unit(benchmark::kMillisecond);
