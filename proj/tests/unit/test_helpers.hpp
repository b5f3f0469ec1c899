#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "paic/rng.hpp"
#include "paic/simulate.hpp"
#include "paic/trial_data.hpp"

namespace test_helpers {

// Standard binary-outcome DGP: two prognostic factors, two effect modifiers,
// with the aggregate trial's population shifted on every covariate.
inline paic::TrialDgp binary_dgp() {
  paic::TrialDgp dgp;
  dgp.family = paic::Family::binomial;
  dgp.link = paic::Link::logit;
  dgp.n_ipd_per_arm = 100;
  dgp.n_ald_per_arm = 150;
  dgp.ipd_correlation = 0.15;
  dgp.ald_correlation = 0.15;
  dgp.covariates = {
      {"PF_cont_1", true, false, paic::MarginalDist::norm, 0.2, 0.5, 0.45, 0.45},
      {"PF_cont_2", true, false, paic::MarginalDist::norm, 0.2, 0.5, 0.45, 0.45},
      {"EM_cont_1", false, true, paic::MarginalDist::norm, 0.2, 0.5, 0.45, 0.45},
      {"EM_cont_2", false, true, paic::MarginalDist::norm, 0.2, 0.5, 0.45, 0.45},
  };
  dgp.intercept = -0.3;
  dgp.pf_coefficients = {{"PF_cont_1", -0.6}, {"PF_cont_2", 0.5}};
  dgp.em_coefficients = {{"EM_cont_1", -0.8}, {"EM_cont_2", -0.6}};
  dgp.trt_ipd_comparator = -1.0;
  dgp.trt_ald_comparator = -0.6;
  return dgp;
}

inline paic::TrialDgp gaussian_dgp() {
  paic::TrialDgp dgp = binary_dgp();
  dgp.family = paic::Family::gaussian;
  dgp.link = paic::Link::identity;
  dgp.sigma = 0.8;
  return dgp;
}

inline paic::TrialDgp poisson_dgp() {
  paic::TrialDgp dgp = binary_dgp();
  dgp.family = paic::Family::poisson;
  dgp.link = paic::Link::log;
  dgp.intercept = 0.4;
  return dgp;
}

inline paic::TrialPair make_pair(const paic::TrialDgp& dgp, std::uint64_t seed) {
  paic::Rng rng = paic::Rng::substream(seed, paic::streams::dgp, 0);
  return paic::simulate_trial_pair(dgp, rng);
}

// Small deterministic logistic dataset with its design matrix.
inline void small_logistic(int n, std::uint64_t seed, Eigen::MatrixXd& x_out,
                           Eigen::VectorXd& y_out) {
  paic::Rng rng(seed);
  x_out.resize(n, 3);
  y_out.resize(n);
  for (int i = 0; i < n; ++i) {
    x_out(i, 0) = 1.0;
    x_out(i, 1) = rng.normal();
    x_out(i, 2) = rng.normal(0.0, 0.7);
    const double eta = -0.4 + 0.9 * x_out(i, 1) - 0.7 * x_out(i, 2);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    y_out[i] = rng.bernoulli(p);
  }
}

}  // namespace test_helpers
