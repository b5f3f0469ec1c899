#include <benchmark/benchmark.h>

#include <cmath>

#include "paic/copula.hpp"
#include "paic/rng.hpp"
#include "paic/stats.hpp"

namespace {

void bm_simulate_cohort(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  paic::CorrelationMatrix rho =
      paic::CorrelationMatrix::identity({"a", "b", "c", "d"});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) rho.rho(i, j) = rho.rho(j, i) = 0.2;
  paic::MarginalSpec marg;
  marg.names = rho.names;
  marg.marginals = {{paic::MarginalDist::norm, 0.0, 1.0},
                    {paic::MarginalDist::gamma, 4.0, 2.0},
                    {paic::MarginalDist::bernoulli, 0.4, 0.0},
                    {paic::MarginalDist::lognorm, 0.0, 0.5}};
  for (auto _ : state) {
    paic::Rng rng(11);
    benchmark::DoNotOptimize(paic::simulate_cohort(rho, marg, n, rng));
  }
}

void bm_gamma_quantile(benchmark::State& state) {
  paic::Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(paic::stats::gamma_quantile(rng.uniform01(), 44.4444, 0.6349));
  }
}

}  // namespace

BENCHMARK(bm_simulate_cohort)->Arg(1000)->Arg(20000);
BENCHMARK(bm_gamma_quantile);
