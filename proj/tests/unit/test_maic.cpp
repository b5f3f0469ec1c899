#include <doctest.h>

#include <cmath>

#include "paic/errors.hpp"
#include "paic/glm.hpp"
#include "paic/maic.hpp"
#include "paic/rng.hpp"
#include "test_helpers.hpp"

using namespace paic;

TEST_CASE("pre-balanced covariates give zero tilting and unit weights") {
  Rng rng(2);
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(0.4, 1.0);
    x(i, 1) = rng.normal(-0.2, 0.5);
  }
  Eigen::VectorXd target(2);
  target << x.col(0).mean(), x.col(1).mean();
  const WeightSolution ws = estimate_weights(x, target);
  CHECK(ws.converged);
  CHECK(ws.beta.cwiseAbs().maxCoeff() < 1e-7);
  CHECK((ws.weights.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("closed form: single binary covariate, target 0.75") {
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.0, 1.0, 1.0;
  Eigen::VectorXd target(1);
  target << 0.75;
  const WeightSolution ws = estimate_weights(x, target);
  CHECK(ws.converged);
  CHECK(ws.beta[0] == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  const double weighted_mean = ws.weights.dot(x.col(0)) / ws.weights.sum();
  CHECK(weighted_mean == doctest::Approx(0.75).epsilon(1e-8));
  // the solution's weights are (3^-0.75, 3^-0.75, 3^0.25, 3^0.25); direct
  // arithmetic gives (sum w)^2 / sum w^2 = 3.2
  CHECK(ws.ess == doctest::Approx(3.2).epsilon(1e-6));
}

TEST_CASE("target outside the observed range is a no-overlap error") {
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.0, 1.0, 1.0;
  Eigen::VectorXd target(1);
  target << 1.2;
  CHECK_THROWS_WITH_AS(static_cast<void>(estimate_weights(x, target)),
                       doctest::Contains("no covariate overlap"), numeric_error);
  target << 1.0;  // boundary: infimum not attained
  CHECK_THROWS_AS(static_cast<void>(estimate_weights(x, target)), numeric_error);
}

TEST_CASE("moment matching within 1e-6 on randomized instances") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 200;
    const int q = 1 + rng.uniform_int(4);
    Eigen::MatrixXd x(n, q);
    Eigen::VectorXd target(q);
    for (int j = 0; j < q; ++j) {
      const double mu = rng.normal(0.0, 0.5);
      for (int i = 0; i < n; ++i) x(i, j) = rng.normal(mu, 1.0);
      target[j] = mu + rng.normal(0.0, 0.25);  // stay well inside the hull
    }
    const WeightSolution ws = estimate_weights(x, target);
    CHECK(ws.converged);
    CHECK(ws.max_moment_error < 1e-6);
    CHECK(ws.ess <= n + 1e-9);
    CHECK(ws.weights.minCoeff() > 0.0);
  }
}

TEST_CASE("objective value at the solution beats beta = 0 and random perturbations") {
  Rng rng(13);
  const int n = 150, q = 3;
  Eigen::MatrixXd x(n, q);
  Eigen::VectorXd target(q);
  for (int j = 0; j < q; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal(0.0, 1.0);
    target[j] = 0.3;
  }
  const WeightSolution ws = estimate_weights(x, target);
  auto objective = [&](const Eigen::VectorXd& beta) {
    double f = 0.0;
    for (int i = 0; i < n; ++i) f += std::exp(beta.dot(x.row(i).transpose() - target));
    return f;
  };
  const double f_star = objective(ws.beta);
  CHECK(f_star <= objective(Eigen::VectorXd::Zero(q)) + 1e-9);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd perturbed = ws.beta;
    for (int j = 0; j < q; ++j) perturbed[j] += rng.normal(0.0, 0.2);
    CHECK(f_star <= objective(perturbed) + 1e-9);
  }
}

TEST_CASE("effective sample size") {
  Eigen::VectorXd equal = Eigen::VectorXd::Ones(5);
  CHECK(effective_sample_size(equal) == doctest::Approx(5.0).epsilon(1e-12));

  Eigen::VectorXd dominant(4);
  dominant << 1.0, 1e-9, 1e-9, 1e-9;
  CHECK(effective_sample_size(dominant) == doctest::Approx(1.0).epsilon(1e-6));

  Eigen::VectorXd example(4);
  const double lo = std::pow(3.0, -0.75), hi = std::pow(3.0, 0.25);
  example << lo, lo, hi, hi;
  CHECK(effective_sample_size(example) == doctest::Approx(3.2).epsilon(1e-9));

  CHECK_THROWS_AS(effective_sample_size(Eigen::VectorXd()), validation_error);
}

TEST_CASE("ess equals n only for equal weights") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd w(20);
    for (int i = 0; i < 20; ++i) w[i] = std::exp(rng.normal(0.0, 0.4));
    CHECK(effective_sample_size(w) < 20.0 + 1e-9);
  }
}

TEST_CASE("matched covariate set is the PF/EM union") {
  ModelSpec spec;
  spec.outcome = "y";
  spec.treatment = "trt";
  spec.family = Family::gaussian;
  spec.link = Link::identity;
  spec.prognostic_factors = {"a", "b"};
  spec.effect_modifiers = {"b", "c"};
  CHECK(matched_covariate_set(spec) == std::vector<std::string>{"a", "b", "c"});

  spec.prognostic_factors = {};
  spec.effect_modifiers = {"e1"};
  CHECK(matched_covariate_set(spec) == std::vector<std::string>{"e1"});

  spec.effect_modifiers = {};
  CHECK_THROWS_WITH_AS(static_cast<void>(matched_covariate_set(spec)),
                       doctest::Contains("nothing to match"), validation_error);
}

TEST_CASE("two-group weighted logistic fit matches raw arm proportions") {
  const auto pair = test_helpers::make_pair(test_helpers::binary_dgp(), 99);
  const IpdTable& ipd = pair.ipd;
  const ModelSpec spec = dgp_model_spec(test_helpers::binary_dgp());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ipd.n_rows());
  const FitResult fit = maic_two_group_fit(ipd, spec, ones, "A");

  double y_a = 0.0, n_a = 0.0, y_c = 0.0, n_c = 0.0;
  for (int i = 0; i < ipd.n_rows(); ++i) {
    if (ipd.treatments()[i] == "A") {
      y_a += ipd.outcomes()[i];
      n_a += 1.0;
    } else {
      y_c += ipd.outcomes()[i];
      n_c += 1.0;
    }
  }
  const double expected =
      std::log(y_a / (n_a - y_a)) - std::log(y_c / (n_c - y_c));
  CHECK(fit.coefficients[1] == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("rescaling weights leaves the two-group coefficients unchanged") {
  const auto pair = test_helpers::make_pair(test_helpers::binary_dgp(), 101);
  const ModelSpec spec = dgp_model_spec(test_helpers::binary_dgp());
  Rng rng(5);
  Eigen::VectorXd w(pair.ipd.n_rows());
  for (int i = 0; i < w.size(); ++i) w[i] = std::exp(rng.normal(0.0, 0.3));
  const FitResult f1 = maic_two_group_fit(pair.ipd, spec, w, "A");
  const FitResult f2 = maic_two_group_fit(pair.ipd, spec, 4.2 * w, "A");
  CHECK((f1.coefficients - f2.coefficients).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate weighted arm is an error") {
  const auto pair = test_helpers::make_pair(test_helpers::binary_dgp(), 103);
  const ModelSpec spec = dgp_model_spec(test_helpers::binary_dgp());
  Eigen::VectorXd w = Eigen::VectorXd::Ones(pair.ipd.n_rows());
  for (int i = 0; i < pair.ipd.n_rows(); ++i)
    if (pair.ipd.treatments()[i] == "A") w[i] = 0.0;
  CHECK_THROWS_WITH_AS(static_cast<void>(maic_two_group_fit(pair.ipd, spec, w, "A")),
                       doctest::Contains("no weight"), numeric_error);
}

TEST_CASE("constant covariate equal to its target is skipped, unequal errors") {
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;  // constant
    x(i, 1) = i;
  }
  Eigen::VectorXd target(2);
  target << 1.0, 2.5;
  const WeightSolution ws = estimate_weights(x, target);
  CHECK(ws.converged);
  CHECK(ws.beta[0] == 0.0);

  target << 0.9, 2.5;
  CHECK_THROWS_AS(static_cast<void>(estimate_weights(x, target)), numeric_error);
}
