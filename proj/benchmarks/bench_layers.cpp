#include <benchmark/benchmark.h>

#include "sigspp/layers.hpp"
#include "sigspp/rng.hpp"

namespace {

sigspp::Tensor4<float> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  sigspp::Rng rng(seed);
  sigspp::Tensor4<float> t(n, c, h, w);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.flat(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto input = random_tensor(8, 16, size, size, 1);
  const auto weights = random_tensor(24, 16, 5, 5, 2);
  const std::vector<float> bias(24, 0.1f);
  for (auto _ : state) {
    auto out = sigspp::conv2d_forward(input, weights, bias, 2, 2);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(input.size()));
}

void BM_Conv2dBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto input = random_tensor(8, 16, size, size, 3);
  const auto weights = random_tensor(24, 16, 5, 5, 4);
  const std::vector<float> bias(24, 0.1f);
  const auto out = sigspp::conv2d_forward(input, weights, bias, 2, 2);
  for (auto _ : state) {
    auto grads = sigspp::conv2d_backward(input, weights, out, 2, 2);
    benchmark::DoNotOptimize(grads.weights.data());
  }
}

void BM_BatchNormForwardTrain(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto input = random_tensor(16, 32, size, size, 5);
  sigspp::BatchNormParams<float> params(32);
  for (auto _ : state) {
    auto out = sigspp::batchnorm_forward(input, params, true);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_MaxPoolForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto input = random_tensor(16, 32, size, size, 6);
  for (auto _ : state) {
    auto out = sigspp::maxpool_forward(input, 3, 2, 0);
    benchmark::DoNotOptimize(out.output.data());
  }
}

}  // namespace

BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);
BENCHMARK(BM_BatchNormForwardTrain)->Arg(16)->Arg(64);
BENCHMARK(BM_MaxPoolForward)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
