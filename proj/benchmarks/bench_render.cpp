#include <benchmark/benchmark.h>

#include "edgenerf/renderer.hpp"

using namespace edgenerf;

namespace {

FieldParams noisy_grid(int n) {
  FieldParams f = FieldParams::voxel_grid({{n, n, n}, Aabb{}});
  Rng rng(1);
  for (double& v : f.values()) v = -2.0 + 4.0 * rng.uniform();
  return f;
}

Ray diagonal_ray() {
  Ray r;
  r.origin = Vec3(-1.0, -0.9, -0.8);
  r.direction = Vec3(1.0, 0.95, 0.9).normalized();
  r.t_near = 0.0;
  r.t_far = 3.0;
  return r;
}

void BM_RenderForward(benchmark::State& state) {
  const FieldParams f = noisy_grid(65);
  const Ray ray = diagonal_ray();
  const RaySamples s = sample_ray_midpoints(ray, static_cast<int>(state.range(0)));
  const RenderOptions options{state.range(1) != 0};
  for (auto _ : state) benchmark::DoNotOptimize(render(f, ray, s, options));
  state.SetItemsProcessed(state.iterations());
}

void BM_RenderBackward(benchmark::State& state) {
  const FieldParams f = noisy_grid(65);
  const Ray ray = diagonal_ray();
  const RaySamples s = sample_ray_midpoints(ray, static_cast<int>(state.range(0)));
  const bool normals = state.range(1) != 0;
  RenderUpstream up;
  up.color = Vec3(0.1, 0.2, 0.3);
  up.depth = 0.05;
  if (normals) up.normal = Vec3(0.01, -0.02, 0.03);
  std::vector<double> grad(f.size(), 0.0);
  for (auto _ : state) {
    const RayTape tape = render_recorded(f, ray, s, {normals});
    render_backward(f, tape, up, grad);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_RenderForward)->ArgsProduct({{64, 128}, {0, 1}});
BENCHMARK(BM_RenderBackward)->ArgsProduct({{64, 128}, {0, 1}});

BENCHMARK_MAIN();
