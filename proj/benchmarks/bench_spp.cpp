#include <benchmark/benchmark.h>

#include "sigspp/rng.hpp"
#include "sigspp/spp.hpp"

namespace {

void BM_SppForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  sigspp::Rng rng(9);
  sigspp::Tensor4<float> maps(8, 128, size, size);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    maps.flat(i) = static_cast<float>(rng.uniform(0.0, 1.0));
  }
  const sigspp::PyramidSpec spec;
  for (auto _ : state) {
    auto out = sigspp::spp_forward(maps, spec);
    benchmark::DoNotOptimize(out.output.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(maps.size()));
}

void BM_SppRegions(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto regions = sigspp::spp_regions(size, size, 4);
    benchmark::DoNotOptimize(regions.data());
  }
}

}  // namespace

BENCHMARK(BM_SppForward)->Arg(8)->Arg(16)->Arg(32);
BENCHMARK(BM_SppRegions)->Arg(16)->Arg(64)->Arg(256);
