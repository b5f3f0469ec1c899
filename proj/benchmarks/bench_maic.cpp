#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "paic/maic.hpp"
#include "paic/rng.hpp"

namespace {

void bm_estimate_weights(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int q = static_cast<int>(state.range(1));
  paic::Rng rng(7);
  Eigen::MatrixXd x(n, q);
  Eigen::VectorXd target(q);
  for (int j = 0; j < q; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal(0.2, 0.5);
    target[j] = 0.45;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(paic::estimate_weights(x, target));
  }
}

}  // namespace

BENCHMARK(bm_estimate_weights)->Args({200, 4})->Args({1000, 4})->Args({1000, 8});
