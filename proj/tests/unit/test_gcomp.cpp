#include <doctest.h>

#include <cmath>

#include "paic/errors.hpp"
#include "paic/gcomp.hpp"
#include "paic/stats.hpp"
#include "test_helpers.hpp"

using namespace paic;

namespace {

SyntheticCohort cohort_for(const ModelSpec& spec, const IpdTable& ipd, int n,
                           std::uint64_t seed) {
  const auto names = spec.covariates();
  const CorrelationMatrix rho = correlation_from_ipd(ipd, names);
  MarginalSpec marg;
  marg.names = names;
  for (const auto& name : names) {
    const Eigen::VectorXd col = ipd.covariate(name);
    marg.marginals.push_back({MarginalDist::norm, col.mean(), stats::sample_sd(col)});
  }
  Rng rng = Rng::substream(seed, streams::cohort, 0);
  return simulate_cohort(rho, marg, n, rng);
}

}  // namespace

TEST_CASE("identity link without effect modifiers collapses to the treatment coefficient") {
  TrialDgp dgp = test_helpers::gaussian_dgp();
  for (auto& c : dgp.covariates) {
    c.effect_modifier = false;
    c.prognostic = true;
  }
  dgp.em_coefficients.clear();
  const auto pair = test_helpers::make_pair(dgp, 31);
  const ModelSpec spec = dgp_model_spec(dgp);

  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  const FitResult fit = fit_glm(design, pair.ipd.outcomes(),
                                Eigen::VectorXd::Ones(pair.ipd.n_rows()), spec.family,
                                spec.link);
  const SyntheticCohort cohort = cohort_for(spec, pair.ipd, 500, 5);
  const MarginalPair mp = marginalize(fit, spec, cohort);
  CHECK(mp.mean_comparator - mp.mean_reference ==
        doctest::Approx(fit.coefficients[design.treatment_column]).epsilon(1e-12));
}

TEST_CASE("identity link with effect modifiers matches the closed form") {
  const TrialDgp dgp = test_helpers::gaussian_dgp();
  const auto pair = test_helpers::make_pair(dgp, 37);
  const ModelSpec spec = dgp_model_spec(dgp);

  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  const FitResult fit = fit_glm(design, pair.ipd.outcomes(),
                                Eigen::VectorXd::Ones(pair.ipd.n_rows()), spec.family,
                                spec.link);
  const SyntheticCohort cohort = cohort_for(spec, pair.ipd, 800, 7);
  const MarginalPair mp = marginalize(fit, spec, cohort);

  double expected = fit.coefficients[design.treatment_column];
  for (const auto& em : spec.effect_modifiers) {
    const auto it = std::find(cohort.names.begin(), cohort.names.end(), em);
    const Eigen::VectorXd col =
        cohort.covariates.col(it - cohort.names.begin());
    expected += fit.coefficient(spec.treatment + ":" + em) * col.mean();
  }
  CHECK(mp.mean_comparator - mp.mean_reference == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("marginal means sit inside the per-row prediction range") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 41);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  const FitResult fit = fit_glm(design, pair.ipd.outcomes(),
                                Eigen::VectorXd::Ones(pair.ipd.n_rows()), spec.family,
                                spec.link);
  const SyntheticCohort cohort = cohort_for(spec, pair.ipd, 400, 11);
  const DesignMatrix comp = build_profile_design(cohort.names, cohort.covariates, spec, 1.0);
  const Eigen::VectorXd preds = predict_mean(fit, comp.X);
  const MarginalPair mp = marginalize(fit, spec, cohort);
  CHECK(mp.mean_comparator >= preds.minCoeff() - 1e-12);
  CHECK(mp.mean_comparator <= preds.maxCoeff() + 1e-12);
}

TEST_CASE("degenerate one-row cohort gives the conditional contrast at that row") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 43);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  const FitResult fit = fit_glm(design, pair.ipd.outcomes(),
                                Eigen::VectorXd::Ones(pair.ipd.n_rows()), spec.family,
                                spec.link);
  SyntheticCohort one = cohort_for(spec, pair.ipd, 1, 13);
  const MarginalPair mp = marginalize(fit, spec, one);
  const DesignMatrix comp = build_profile_design(one.names, one.covariates, spec, 1.0);
  const DesignMatrix ref = build_profile_design(one.names, one.covariates, spec, 0.0);
  CHECK(mp.mean_comparator == doctest::Approx(predict_mean(fit, comp.X)[0]).epsilon(1e-14));
  CHECK(mp.mean_reference == doctest::Approx(predict_mean(fit, ref.X)[0]).epsilon(1e-14));
}

TEST_CASE("monte carlo stability across cohort seeds") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 47);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  const FitResult fit = fit_glm(design, pair.ipd.outcomes(),
                                Eigen::VectorXd::Ones(pair.ipd.n_rows()), spec.family,
                                spec.link);
  const int n = 10000;
  const SyntheticCohort c1 = cohort_for(spec, pair.ipd, n, 17);
  const SyntheticCohort c2 = cohort_for(spec, pair.ipd, n, 18);
  const MarginalPair m1 = marginalize(fit, spec, c1);
  const MarginalPair m2 = marginalize(fit, spec, c2);
  const Scale lo{ScaleKind::log_odds};
  const double d1 = contrast_from_means(lo, m1.mean_comparator, m1.mean_reference);
  const double d2 = contrast_from_means(lo, m2.mean_comparator, m2.mean_reference);

  // cohort-level standard error of the contrast from the per-row spread
  const DesignMatrix comp = build_profile_design(c1.names, c1.covariates, spec, 1.0);
  const DesignMatrix ref = build_profile_design(c1.names, c1.covariates, spec, 0.0);
  const Eigen::VectorXd pa = predict_mean(fit, comp.X);
  const Eigen::VectorXd pc = predict_mean(fit, ref.X);
  const double var_a = stats::sample_variance(pa) / n;
  const double var_c = stats::sample_variance(pc) / n;
  const double ga = 1.0 / (m1.mean_comparator * (1.0 - m1.mean_comparator));
  const double gc = 1.0 / (m1.mean_reference * (1.0 - m1.mean_reference));
  const double se = std::sqrt(ga * ga * var_a + gc * gc * var_c);
  CHECK(std::abs(d1 - d2) < 3.0 * std::sqrt(2.0) * se);
}

TEST_CASE("rubin pooling hand example and identities") {
  Eigen::VectorXd q(2), u(2);
  q << 1.0, 3.0;
  u << 0.5, 0.5;
  const RubinPooled pooled = rubin_pool(q, u, 100.0);
  CHECK(pooled.q_bar == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(pooled.b == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(pooled.total_var == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(pooled.nu > 0.0);

  Eigen::VectorXd q_same = Eigen::VectorXd::Constant(5, 1.7);
  Eigen::VectorXd u_same = Eigen::VectorXd::Constant(5, 0.2);
  const RubinPooled no_between = rubin_pool(q_same, u_same, 50.0);
  CHECK(no_between.b == 0.0);
  CHECK(no_between.total_var == doctest::Approx(0.2).epsilon(1e-14));

  // identity and positivity across random instances
  Rng rng(51);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 2 + rng.uniform_int(10);
    Eigen::VectorXd qq(m), uu(m);
    for (int i = 0; i < m; ++i) {
      qq[i] = rng.normal();
      uu[i] = std::exp(rng.normal(-1.0, 0.5));
    }
    const RubinPooled p = rubin_pool(qq, uu, 20.0);
    CHECK(p.total_var ==
          doctest::Approx(p.u_bar + (1.0 + 1.0 / m) * p.b).epsilon(1e-12));
    CHECK(p.total_var >= p.u_bar);
    CHECK(p.nu > 0.0);
  }

  CHECK_THROWS_AS(rubin_pool(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), 10.0),
                  validation_error);
}

TEST_CASE("posterior sampling is deterministic given the seed") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 53);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");

  PosteriorOptions opts;
  opts.burnin = 200;
  opts.draws = 300;
  Rng r1 = Rng::substream(5, streams::posterior, 0);
  Rng r2 = Rng::substream(5, streams::posterior, 0);
  const PosteriorDraws d1 = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                             spec.link, opts, r1);
  const PosteriorDraws d2 = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                             spec.link, opts, r2);
  CHECK(d1.draws == d2.draws);
  CHECK(d1.acceptance_rate == d2.acceptance_rate);
  CHECK(d1.acceptance_rate > 0.1);
  CHECK(d1.acceptance_rate < 0.6);
}

TEST_CASE("tight priors shrink the coefficients toward zero") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 59);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");

  PosteriorOptions weak;
  weak.burnin = 300;
  weak.draws = 600;
  PosteriorOptions tight = weak;
  tight.prior_scale = 0.05;
  tight.prior_intercept_sd = 0.05;

  Rng r1 = Rng::substream(7, streams::posterior, 0);
  Rng r2 = Rng::substream(7, streams::posterior, 0);
  const PosteriorDraws dw = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                             spec.link, weak, r1);
  const PosteriorDraws dt = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                             spec.link, tight, r2);
  const double norm_weak = dw.draws.colwise().mean().norm();
  const double norm_tight = dt.draws.colwise().mean().norm();
  CHECK(norm_tight < 0.5 * norm_weak);
}

TEST_CASE("multiple chains concatenate and report a finite split r-hat") {
  const TrialDgp dgp = test_helpers::binary_dgp();
  const auto pair = test_helpers::make_pair(dgp, 67);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  PosteriorOptions opts;
  opts.burnin = 200;
  opts.draws = 300;
  opts.chains = 2;
  Rng rng = Rng::substream(15, streams::posterior, 0);
  const PosteriorDraws d = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                            spec.link, opts, rng);
  CHECK(d.draws.rows() == 600);
  CHECK(d.n_chains == 2);
  for (Eigen::Index j = 0; j < d.rhat.size(); ++j) {
    CHECK(std::isfinite(d.rhat[j]));
    CHECK(d.rhat[j] < 1.3);
  }
}

TEST_CASE("gaussian posterior carries a log_sigma parameter") {
  const TrialDgp dgp = test_helpers::gaussian_dgp();
  const auto pair = test_helpers::make_pair(dgp, 61);
  const ModelSpec spec = dgp_model_spec(dgp);
  const DesignMatrix design = build_design(pair.ipd, spec, "A");
  PosteriorOptions opts;
  opts.burnin = 200;
  opts.draws = 200;
  Rng rng = Rng::substream(9, streams::posterior, 0);
  const PosteriorDraws d = sample_posterior(design, pair.ipd.outcomes(), spec.family,
                                            spec.link, opts, rng);
  CHECK(d.names.back() == "log_sigma");
  CHECK(d.draws.cols() == design.X.cols() + 1);
  // sigma should sit near the true residual sd
  const double sigma_hat = std::exp(d.draws.col(d.draws.cols() - 1).mean());
  CHECK(sigma_hat == doctest::Approx(dgp.sigma).epsilon(0.25));
}
