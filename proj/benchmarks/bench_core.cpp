#include <benchmark/benchmark.h>

#include "normest/estimators.hpp"
#include "normest/jet.hpp"
#include "normest/random.hpp"
#include "normest/synth.hpp"
#include "normest/training.hpp"

namespace {

using namespace normest;

PointCloud bench_cloud(int n) {
  ShapeSpec spec;
  spec.kind = ShapeKind::QuadricHeightField;
  spec.parameters = {0, 0, 0, 0.4, -0.2, 0.3};
  spec.count = n;
  spec.seed = 11;
  return add_gaussian_noise(gen_shape(spec), 0.005, 12);
}

void BM_KnnQuery(benchmark::State& state) {
  const PointCloud cloud = bench_cloud(20000);
  const KnnIndex index(cloud);
  const int r = static_cast<int>(state.range(0));
  int q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(q, r));
    q = (q + 97) % cloud.size();
  }
}
BENCHMARK(BM_KnnQuery)->Arg(64)->Arg(256)->Arg(512);

void BM_ExtractPatch(benchmark::State& state) {
  const PointCloud cloud = bench_cloud(20000);
  const KnnIndex index(cloud);
  const int r = static_cast<int>(state.range(0));
  int q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_patch(cloud, index, q, r));
    q = (q + 97) % cloud.size();
  }
}
BENCHMARK(BM_ExtractPatch)->Arg(256)->Arg(512);

void BM_WlsFit(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int order = static_cast<int>(state.range(1));
  Rng rng(3);
  Points pts(k, 3);
  Eigen::VectorXd w(k);
  for (int i = 0; i < k; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    pts.row(i) << x, y, 0.3 * x * x - 0.1 * y * y + rng.normal(0, 0.01);
    w[i] = rng.uniform(0.1, 1.0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(wls_fit(pts, w, order));
  }
}
BENCHMARK(BM_WlsFit)->Args({50, 3})->Args({100, 3})->Args({256, 3});

void BM_ForwardPipeline(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const PointCloud cloud = bench_cloud(4 * r);
  const KnnIndex index(cloud);
  const Patch patch = extract_patch(cloud, index, 0, r);
  ModelParams params;
  params.randomize(5, /*zero_final_layers=*/false);
  PipelineConfig pc{std::max(10, r / 5), 3, 8, false};
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_pipeline(params, patch, pc));
  }
}
BENCHMARK(BM_ForwardPipeline)->Arg(128)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const int r = static_cast<int>(state.range(0));
  const PointCloud cloud = bench_cloud(4 * r);
  const KnnIndex index(cloud);
  const Patch patch = extract_patch(cloud, index, 0, r);
  const Vec3 gt = cloud.gt_normals[0];
  ModelParams params;
  params.randomize(5, /*zero_final_layers=*/false);
  PipelineConfig pc{std::max(10, r / 5), 3, 8, false};
  for (auto _ : state) {
    ForwardResult fwd = forward_pipeline(params, patch, pc);
    LossVars loss = build_loss(fwd, gt, 1.0, 0.1);
    fwd.tape.backward(loss.total);
    benchmark::DoNotOptimize(fwd.tape.grad(fwd.params.vars[0]));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
