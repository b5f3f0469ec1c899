#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "paic/glm.hpp"
#include "paic/rng.hpp"

namespace {

void make_logistic(int n, int p, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  paic::Rng rng(42);
  x.resize(n, p);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    double eta = -0.4;
    for (int j = 1; j < p; ++j) {
      x(i, j) = rng.normal();
      eta += 0.3 * (j % 2 ? 1 : -1) * x(i, j);
    }
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta)));
  }
}

void bm_fit_logistic(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int p = static_cast<int>(state.range(1));
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_logistic(n, p, x, y);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        paic::fit_glm(x, y, w, paic::Family::binomial, paic::Link::logit));
  }
}

void bm_sandwich(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_logistic(n, 6, x, y);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const paic::FitResult fit =
      paic::fit_glm(x, y, w, paic::Family::binomial, paic::Link::logit);
  for (auto _ : state) {
    benchmark::DoNotOptimize(paic::sandwich_cov(fit, x, y, w));
  }
}

}  // namespace

BENCHMARK(bm_fit_logistic)->Args({200, 6})->Args({1000, 6})->Args({5000, 12});
BENCHMARK(bm_sandwich)->Arg(200)->Arg(2000);
