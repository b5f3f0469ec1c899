#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "paic/glm.hpp"
#include "paic/rng.hpp"
#include "paic/stats.hpp"
#include "test_helpers.hpp"

using namespace paic;

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// Independent oracle: Newton on the raw Bernoulli log likelihood with
// finite-difference gradient and Hessian. No IRLS machinery involved.
Eigen::VectorXd oracle_logistic_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto p = x.cols();
  auto loglik = [&](const Eigen::VectorXd& b) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double eta = x.row(i).dot(b);
      ll += y[i] * eta - softplus(eta);
    }
    return ll;
  };
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double h = 1e-5;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd grad(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd hi = beta, lo = beta;
      hi[j] += h;
      lo[j] -= h;
      grad[j] = (loglik(hi) - loglik(lo)) / (2.0 * h);
    }
    Eigen::MatrixXd hess(p, p);
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index k = 0; k <= j; ++k) {
        Eigen::VectorXd pp = beta, pm = beta, mp = beta, mm = beta;
        pp[j] += h; pp[k] += h;
        pm[j] += h; pm[k] -= h;
        mp[j] -= h; mp[k] += h;
        mm[j] -= h; mm[k] -= h;
        hess(j, k) = hess(k, j) =
            (loglik(pp) - loglik(pm) - loglik(mp) + loglik(mm)) / (4.0 * h * h);
      }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-11) break;
  }
  return beta;
}

}  // namespace

TEST_CASE("gaussian identity with unit weights equals the normal equations") {
  Rng rng(3);
  const int n = 40;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal(1.0, 2.0);
    y[i] = 0.5 + 1.5 * x(i, 1) - 0.3 * x(i, 2) + rng.normal(0.0, 0.4);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const FitResult fit = fit_glm(x, y, ones, Family::gaussian, Link::identity);
  const Eigen::VectorXd ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((fit.coefficients - ols).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.converged);
}

TEST_CASE("logistic fit matches the brute-force likelihood oracle") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(50, 17, x, y);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(50);
  const FitResult fit = fit_glm(x, y, ones, Family::binomial, Link::logit);
  const Eigen::VectorXd oracle = oracle_logistic_mle(x, y);
  CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("constant weights do not move the maximiser") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(60, 23, x, y);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(60);
  const Eigen::VectorXd scaled = 3.7 * ones;
  const FitResult f1 = fit_glm(x, y, ones, Family::binomial, Link::logit);
  const FitResult f2 = fit_glm(x, y, scaled, Family::binomial, Link::logit);
  CHECK((f1.coefficients - f2.coefficients).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("doubling weights halves the model covariance exactly") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(80, 29, x, y);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(80);
  const FitResult f1 = fit_glm(x, y, ones, Family::binomial, Link::logit);
  const FitResult f2 = fit_glm(x, y, 2.0 * ones, Family::binomial, Link::logit);
  CHECK((f2.model_cov - 0.5 * f1.model_cov).cwiseAbs().maxCoeff() < 1e-10);

  // gaussian case relies on the weight-invariant dispersion
  Rng rng(31);
  Eigen::VectorXd yg(80);
  for (int i = 0; i < 80; ++i) yg[i] = 1.0 + x(i, 1) + rng.normal(0.0, 0.5);
  const FitResult g1 = fit_glm(x, yg, ones, Family::gaussian, Link::identity);
  const FitResult g2 = fit_glm(x, yg, 2.0 * ones, Family::gaussian, Link::identity);
  CHECK((g2.model_cov - 0.5 * g1.model_cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicating every row halves the model covariance") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(50, 37, x, y);
  Eigen::MatrixXd x2(100, 3);
  Eigen::VectorXd y2(100);
  x2 << x, x;
  y2 << y, y;
  const FitResult f1 =
      fit_glm(x, y, Eigen::VectorXd::Ones(50), Family::binomial, Link::logit);
  const FitResult f2 =
      fit_glm(x2, y2, Eigen::VectorXd::Ones(100), Family::binomial, Link::logit);
  CHECK((f1.coefficients - f2.coefficients).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((f2.model_cov - 0.5 * f1.model_cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("score vanishes at the IRLS fixed point") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(70, 41, x, y);
  const FitResult fit =
      fit_glm(x, y, Eigen::VectorXd::Ones(70), Family::binomial, Link::logit);
  CHECK(fit.score_inf_norm < 1e-8);
}

TEST_CASE("deviance history is non-increasing") {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  test_helpers::small_logistic(90, 43, x, y);
  const FitResult fit =
      fit_glm(x, y, Eigen::VectorXd::Ones(90), Family::binomial, Link::probit);
  REQUIRE(fit.deviance_history.size() >= 2);
  for (std::size_t i = 1; i < fit.deviance_history.size(); ++i)
    CHECK(fit.deviance_history[i] <=
          fit.deviance_history[i - 1] + 1e-12 * (1.0 + std::abs(fit.deviance_history[i - 1])));
}

TEST_CASE("probit and cloglog recover simulated coefficients approximately") {
  Rng rng(47);
  const int n = 4000;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y_probit(n), y_cloglog(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    const double eta = -0.3 + 0.8 * x(i, 1);
    y_probit[i] = rng.bernoulli(stats::norm_cdf(eta));
    y_cloglog[i] = rng.bernoulli(-std::expm1(-std::exp(eta)));
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const FitResult fp = fit_glm(x, y_probit, ones, Family::binomial, Link::probit);
  CHECK(fp.coefficients[0] == doctest::Approx(-0.3).epsilon(0.2));
  CHECK(fp.coefficients[1] == doctest::Approx(0.8).epsilon(0.2));
  const FitResult fc = fit_glm(x, y_cloglog, ones, Family::binomial, Link::cloglog);
  CHECK(fc.coefficients[0] == doctest::Approx(-0.3).epsilon(0.2));
  CHECK(fc.coefficients[1] == doctest::Approx(0.8).epsilon(0.2));
}

TEST_CASE("perfect separation is an error carrying the last iterate") {
  Eigen::MatrixXd x(8, 2);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i < 4 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    y[i] = i < 4 ? 0.0 : 1.0;
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
  try {
    fit_glm(x, y, ones, Family::binomial, Link::logit);
    FAIL("expected glm_error");
  } catch (const glm_error& e) {
    CHECK_FALSE(e.last.converged);
    CHECK(e.last.coefficients.size() == 2);
  }
}

TEST_CASE("singular design is rejected") {
  Eigen::MatrixXd x(10, 2);
  Eigen::VectorXd y(10);
  Rng rng(53);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = 1.0;  // duplicate of the intercept
    y[i] = rng.normal();
  }
  CHECK_THROWS_AS(
      fit_glm(x, y, Eigen::VectorXd::Ones(10), Family::gaussian, Link::identity),
      numeric_error);
}

TEST_CASE("sandwich equals direct HC0 algebra for gaussian identity") {
  Rng rng(59);
  const int n = 9, p = 3;
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal(0.0, 2.0);
    y[i] = rng.normal(0.3 * x(i, 1), 1.0 + 0.5 * std::abs(x(i, 2)));
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const FitResult fit = fit_glm(x, y, ones, Family::gaussian, Link::identity);

  const Eigen::MatrixXd bread_inv = (x.transpose() * x).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd resid = y - x * fit.coefficients;
  for (int i = 0; i < n; ++i)
    meat += resid[i] * resid[i] * x.row(i).transpose() * x.row(i);
  const Eigen::MatrixXd expected = bread_inv * meat * bread_inv;
  CHECK((fit.sandwich_cov - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact fit makes the sandwich collapse") {
  // n == p: residuals are zero, so the meat and the variance vanish
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 0.0, 1.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.3, 1.1;
  const FitResult fit =
      fit_glm(x, y, Eigen::VectorXd::Ones(2), Family::gaussian, Link::identity);
  CHECK(fit.sandwich_cov.cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("sandwich matches a finite-difference score construction on every link") {
  // independent route: the quasi-score is rebuilt from first principles and
  // its Jacobian taken by central differences
  Rng rng(71);
  const int n = 120;
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal(0.0, 0.6);
    x(i, 2) = rng.normal(0.2, 0.5);
  }
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 + rng.uniform01();

  struct Case {
    Family family;
    Link link;
    double b0, b1, b2;
  };
  for (const Case c : {Case{Family::binomial, Link::logit, -1.0, 0.6, -0.4},
                       Case{Family::binomial, Link::probit, -1.0, 0.6, -0.4},
                       Case{Family::binomial, Link::cloglog, -1.0, 0.6, -0.4},
                       // log-binomial needs the whole predictor below zero
                       Case{Family::binomial, Link::log, -1.6, 0.25, -0.2},
                       Case{Family::poisson, Link::log, -1.0, 0.6, -0.4},
                       Case{Family::gaussian, Link::identity, -1.0, 0.6, -0.4}}) {
    const LinkFunction lf{c.link};
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      const double eta = c.b0 + c.b1 * x(i, 1) + c.b2 * x(i, 2);
      const double mu = lf.mu(eta);
      switch (c.family) {
        case Family::binomial: y[i] = rng.bernoulli(std::clamp(mu, 0.0, 1.0)); break;
        case Family::poisson: y[i] = static_cast<double>(rng.poisson(mu)); break;
        case Family::gaussian: y[i] = rng.normal(mu, 0.7); break;
      }
    }
    const FitResult fit = fit_glm(x, y, w, c.family, c.link);

    auto score = [&](const Eigen::VectorXd& theta) {
      Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
      const Eigen::VectorXd eta = x * theta;
      for (int i = 0; i < n; ++i) {
        const double mu = lf.mu(eta[i]);
        const double v = family_variance(c.family, mu);
        s += (w[i] * (y[i] - mu) * lf.dmu_deta(eta[i]) / v) * x.row(i).transpose();
      }
      return s;
    };
    Eigen::MatrixXd bread_fd(3, 3);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd hi = fit.coefficients, lo = fit.coefficients;
      hi[j] += h;
      lo[j] -= h;
      bread_fd.col(j) = -(score(hi) - score(lo)) / (2.0 * h);
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
    const Eigen::VectorXd eta = x * fit.coefficients;
    for (int i = 0; i < n; ++i) {
      const double mu = lf.mu(eta[i]);
      const double r = lf.dmu_deta(eta[i]) / family_variance(c.family, mu);
      const double si = w[i] * (y[i] - mu) * r;
      meat += si * si * x.row(i).transpose() * x.row(i);
    }
    const Eigen::MatrixXd bread_inv = bread_fd.inverse();
    const Eigen::MatrixXd expected = bread_inv * meat * bread_inv;
    const double scale = expected.cwiseAbs().maxCoeff();
    CHECK((fit.sandwich_cov - expected).cwiseAbs().maxCoeff() < 1e-6 * scale);
  }
}

TEST_CASE("delta method: identity, linear and exp transforms") {
  Eigen::VectorXd theta(2);
  theta << 0.0, 1.3;
  Eigen::MatrixXd cov(2, 2);
  cov << 0.04, 0.01, 0.01, 0.09;

  const double v0 = delta_method_var([](const Eigen::VectorXd& t) { return t[0]; }, theta, cov);
  CHECK(v0 == doctest::Approx(0.04).epsilon(1e-9));

  Eigen::VectorXd a(2);
  a << 2.0, -1.0;
  const double vl = delta_method_var(
      [&](const Eigen::VectorXd& t) { return a.dot(t); }, theta, cov);
  CHECK(vl == doctest::Approx((a.transpose() * cov * a).value()).epsilon(1e-9));

  // exp(theta_0) at theta_0 = 0: gradient is exactly 1
  const double ve = delta_method_var(
      [](const Eigen::VectorXd& t) { return std::exp(t[0]); }, theta, cov);
  CHECK(ve == doctest::Approx(0.04).epsilon(1e-6));

  CHECK_THROWS_AS(delta_method_var(
                      [](const Eigen::VectorXd& t) { return std::log(t[0] - 1.0); }, theta, cov),
                  numeric_error);
}

TEST_CASE("predict_mean reproduces fitted values and stays in range") {
  Rng rng(61);
  const int n = 30;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    y[i] = 2.0 - x(i, 1) + rng.normal(0.0, 0.3);
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const FitResult fit = fit_glm(x, y, ones, Family::gaussian, Link::identity);
  const Eigen::VectorXd fitted = predict_mean(fit, x);
  // with an intercept the fitted values average to the outcome mean
  CHECK(fitted.mean() == doctest::Approx(y.mean()).epsilon(1e-10));

  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  test_helpers::small_logistic(40, 67, xb, yb);
  const FitResult fitb =
      fit_glm(xb, yb, Eigen::VectorXd::Ones(40), Family::binomial, Link::logit);
  const Eigen::VectorXd probs = predict_mean(fitb, xb);
  CHECK(probs.minCoeff() > 0.0);
  CHECK(probs.maxCoeff() < 1.0);

  // intercept-only row
  Eigen::MatrixXd x0(1, 3);
  x0 << 1.0, 0.0, 0.0;
  const LinkFunction lf{Link::logit};
  CHECK(predict_mean(fitb, x0)[0] == doctest::Approx(lf.mu(fitb.coefficients[0])).epsilon(1e-12));

  Eigen::MatrixXd wrong(1, 2);
  wrong << 1.0, 0.0;
  CHECK_THROWS_AS(predict_mean(fitb, wrong), validation_error);
}

TEST_CASE("link functions invert to 1e-12") {
  // upper limits sit where the mean still has slack from 1 in double
  // precision (cloglog saturates the earliest)
  for (const auto& [link, hi] :
       std::vector<std::pair<Link, double>>{{Link::identity, 4.0},
                                            {Link::logit, 4.0},
                                            {Link::log, 4.0},
                                            {Link::probit, 3.5},
                                            {Link::cloglog, 2.2}}) {
    const LinkFunction lf{link};
    for (double eta = -4.0; eta <= hi; eta += 0.29) {
      CHECK(lf.eta(lf.mu(eta)) == doctest::Approx(eta).epsilon(1e-12));
      // derivative sanity against a central difference
      const double h = 1e-6;
      const double fd = (lf.mu(eta + h) - lf.mu(eta - h)) / (2.0 * h);
      CHECK(lf.dmu_deta(eta) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}
