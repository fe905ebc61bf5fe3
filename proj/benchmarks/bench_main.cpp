#include <benchmark/benchmark.h>

#include <random>

#include "scene_eval/catmerge.hpp"
#include "scene_eval/frechet.hpp"
#include "scene_eval/manifold.hpp"
#include "scene_eval/splits.hpp"

using namespace scene_eval;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed, std::uint32_t classes = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  std::vector<float> data(n * dim);
  for (auto& v : data) v = normal(rng);
  std::vector<EmbeddingRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    recs[i].conditioning_id = "c" + std::to_string(i);
    if (classes) {
      recs[i].granularity = Granularity::object;
      recs[i].object_class = ClassId{static_cast<std::uint32_t>(rng() % classes)};
    }
  }
  return EmbeddingSet(dim, std::move(data), std::move(recs));
}

void BM_ComputeRadii(benchmark::State& state) {
  auto pts = random_set(state.range(0), state.range(1), 1);
  for (auto _ : state) benchmark::DoNotOptimize(compute_radii(pts, pts, 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ComputeRadii)->Args({500, 64})->Args({2000, 64})->Args({2000, 512})->Unit(benchmark::kMillisecond);

void BM_Precision(benchmark::State& state) {
  auto real = random_set(state.range(0), 128, 2);
  auto gen = random_set(state.range(0), 128, 3);
  auto m = compute_radii(real, real, 5);
  for (auto _ : state) benchmark::DoNotOptimize(precision(gen, m));
}
BENCHMARK(BM_Precision)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_SymmetricEigen(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  auto x = random_set(2 * d + 10, d, 4);
  auto cov = fit_gaussian(x).cov();
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eigen(cov));
}
BENCHMARK(BM_SymmetricEigen)->Arg(32)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Fid(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  auto x = random_set(2000, d, 5);
  auto y = random_set(2000, d, 6);
  for (auto _ : state) benchmark::DoNotOptimize(fid(x, y));
}
BENCHMARK(BM_Fid)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_OneNnConfusion(benchmark::State& state) {
  auto crops = random_set(state.range(0), 128, 7, 20);
  for (auto _ : state) benchmark::DoNotOptimize(one_nn_confusion(crops, 20));
}
BENCHMARK(BM_OneNnConfusion)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_SubsampleMatched(benchmark::State& state) {
  std::mt19937_64 rng(8);
  std::vector<Conditioning> source;
  for (int i = 0; i < state.range(0); ++i) {
    std::vector<ObjectInstance> inst;
    for (int j = 0, n = 1 + static_cast<int>(rng() % 6); j < n; ++j) {
      inst.push_back({ClassId{static_cast<std::uint32_t>(rng() % 40)}, Box{0, 0, 1, 1}});
    }
    source.emplace_back("s" + std::to_string(i), std::move(inst));
  }
  std::vector<Conditioning> target(source.begin(), source.begin() + state.range(0) / 4);
  auto hist = class_histogram(target);
  for (auto _ : state) {
    benchmark::DoNotOptimize(subsample_matched(source, hist, state.range(0) / 10, 1));
  }
}
BENCHMARK(BM_SubsampleMatched)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
