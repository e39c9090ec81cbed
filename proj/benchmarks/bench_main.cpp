#include <benchmark/benchmark.h>

#include "azsearch/dataset.hpp"
#include "azsearch/geometry.hpp"
#include "azsearch/predictor.hpp"
#include "azsearch/rng.hpp"
#include "azsearch/sampling.hpp"
#include "azsearch/search.hpp"
#include "azsearch/training.hpp"

namespace {

using namespace azsearch;

std::vector<Box> random_boxes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
    boxes.push_back({x, y, x + rng.uniform(4, 112), y + rng.uniform(4, 112)});
  }
  return boxes;
}

const Scene& bench_scene() {
  static const Scene scene = generate_scenes(SceneConfig::defaults(), 1, 9).front();
  return scene;
}

void BM_Iou(benchmark::State& state) {
  const auto boxes = random_boxes(1024, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(boxes[i & 1023], boxes[(i * 7 + 3) & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

void BM_EncodeDecode(benchmark::State& state) {
  const auto boxes = random_boxes(1024, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = boxes[i & 1023];
    benchmark::DoNotOptimize(decode_box(a, encode_box(a, boxes[(i + 1) & 1023])));
    ++i;
  }
}
BENCHMARK(BM_EncodeDecode);

void BM_PoolRegionNaive(benchmark::State& state) {
  const auto grid = render(bench_scene(), 0.02, 1);
  const Box region{0, 0, static_cast<double>(state.range(0)), static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(pool_region(grid, region, 4));
}
BENCHMARK(BM_PoolRegionNaive)->Arg(32)->Arg(128)->Arg(512);

void BM_PoolRegionIndexed(benchmark::State& state) {
  const PoolingIndex index(render(bench_scene(), 0.02, 1));
  const Box region{0, 0, static_cast<double>(state.range(0)), static_cast<double>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(index.pool(region, 4));
}
BENCHMARK(BM_PoolRegionIndexed)->Arg(32)->Arg(128)->Arg(512);

void BM_OracleAdaptiveSearch(benchmark::State& state) {
  const OraclePredictor oracle;
  const SceneContext ctx{&bench_scene(), nullptr};
  std::size_t anchors = 0;
  for (auto _ : state) {
    const auto r = adaptive_search(oracle, ctx, {});
    anchors = r.trace.anchors_evaluated();
    benchmark::DoNotOptimize(r.proposals.data());
  }
  state.counters["anchors"] = static_cast<double>(anchors);
}
BENCHMARK(BM_OracleAdaptiveSearch);

void BM_ForwardBackward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const auto params = ModelParameters::initialized(4, hidden, kRenderChannels, 1);
  const auto& scene = bench_scene();
  const auto sample = build_inverse_samples(scene).front();
  const auto features = PoolingIndex(render(scene, 0.02, 1)).pool(sample.anchor, 4);
  auto grads = ModelParameters::zeros(4, hidden, kRenderChannels);
  for (auto _ : state) {
    const auto fr = forward(params, features);
    benchmark::DoNotOptimize(multitask_loss(params, fr, sample, &grads));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
