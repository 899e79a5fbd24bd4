#include <benchmark/benchmark.h>

#include "sigspp/rng.hpp"
#include "sigspp/svm.hpp"

namespace {

// Two gaussian blobs, one positive vs many negatives as in WD training.
void make_problem(int positives, int negatives, int dim,
                  std::vector<std::vector<float>>* x, std::vector<int>* y) {
  sigspp::Rng rng(13);
  for (int i = 0; i < positives + negatives; ++i) {
    const bool pos = i < positives;
    std::vector<float> v(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      v[static_cast<std::size_t>(d)] =
          static_cast<float>(rng.normal() + (pos ? 1.5 : -1.5));
    }
    x->push_back(std::move(v));
    y->push_back(pos ? 1 : -1);
  }
}

void BM_TrainSvmRbf(benchmark::State& state) {
  const int negatives = static_cast<int>(state.range(0));
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  make_problem(12, negatives, 128, &x, &y);
  sigspp::SvmConfig config;
  config.gamma = 1.0 / 128.0;
  for (auto _ : state) {
    auto classifier = sigspp::train_svm(x, y, config);
    benchmark::DoNotOptimize(classifier.bias);
  }
}

void BM_DecideRbf(benchmark::State& state) {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  make_problem(12, 200, 128, &x, &y);
  sigspp::SvmConfig config;
  config.gamma = 1.0 / 128.0;
  const auto classifier = sigspp::train_svm(x, y, config);
  for (auto _ : state) {
    for (const auto& v : x) {
      benchmark::DoNotOptimize(classifier.decide(v));
    }
  }
}

}  // namespace

BENCHMARK(BM_TrainSvmRbf)->Arg(100)->Arg(400);
BENCHMARK(BM_DecideRbf);
