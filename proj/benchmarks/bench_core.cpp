#include <benchmark/benchmark.h>

#include <random>

#include "surfelnbp/fusion.hpp"
#include "surfelnbp/k_shortest_paths.hpp"
#include "surfelnbp/refine.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/scene.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/view_eval.hpp"

using namespace surfelnbp;

namespace {

const Intrinsics kK = Intrinsics::from_vertical_fov(160, 120, 65.0);

const Scene& sphere() {
  static const Scene s(primitives::icosphere(4, 0.1));
  return s;
}

/// Sphere fused from views on a golden-angle spiral until `n` surfels.
SurfelModel fused_sphere(std::size_t n) {
  std::vector<Surfel> all;
  for (int i = 0; all.size() < n && i < 128; ++i) {
    const double az = i * 2.399963, el = 0.9 - 1.6 * (i % 8) / 7.0;
    const Vec3 eye = 0.37 * Vec3(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el));
    const Frame f = capture(sphere(), look_at(eye, Vec3::Zero()), kK, {}, i);
    SurfelModel m;
    m.insert(all);
    auto s = spawn_surfels(f, compute_update_mask(f, render(m, f.pose, kK))).surfels;
    all.insert(all.end(), s.begin(), s.end());
  }
  all.resize(std::min(all.size(), n));
  SurfelModel m;
  m.insert(std::move(all));
  return m;
}

const Pose kView = look_at(Vec3(0.2, -0.2, 0.25), Vec3::Zero());

void BM_Capture(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(capture(sphere(), kView, kK));
}
BENCHMARK(BM_Capture)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const SurfelModel m = fused_sphere(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render(m, kView, kK));
}
BENCHMARK(BM_Render)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_UncertaintyMap(benchmark::State& state) {
  const SurfelModel m = fused_sphere(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uncertainty_map(m, kView, kK, {}));
}
BENCHMARK(BM_UncertaintyMap)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_UpdateAndSpawn(benchmark::State& state) {
  const SurfelModel m = fused_sphere(2000);
  const Frame f = capture(sphere(), kView, kK);
  const RenderBuffers b = render(m, kView, kK);
  for (auto _ : state) benchmark::DoNotOptimize(spawn_surfels(f, compute_update_mask(f, b)));
}
BENCHMARK(BM_UpdateAndSpawn)->Unit(benchmark::kMillisecond);

void BM_RefineIteration(benchmark::State& state) {
  const SurfelModel base = fused_sphere(2000);
  const std::vector<Frame> frames{capture(sphere(), kView, kK)};
  RefineParams p;
  p.iterations = 1;
  for (auto _ : state) {
    SurfelModel m = base;
    benchmark::DoNotOptimize(refine(m, frames, p));
  }
}
BENCHMARK(BM_RefineIteration)->Unit(benchmark::kMillisecond);

void BM_KShortestPaths(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0, 1);
  WeightedGraph g(n);
  // ring plus random chords, roughly a k = 4 view graph
  for (int i = 0; i < n; ++i) {
    g.add_edge(i, (i + 1) % n, 0.1 + U(rng));
    const int j = (i + 2 + static_cast<int>(U(rng) * (n - 3))) % n;
    g.add_edge(i, j, 0.1 + U(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(k_shortest_paths(g, 0, n / 2, 5));
}
BENCHMARK(BM_KShortestPaths)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
