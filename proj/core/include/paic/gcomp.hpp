#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "paic/copula.hpp"
#include "paic/glm.hpp"
#include "paic/rng.hpp"
#include "paic/scales.hpp"
#include "paic/trial_data.hpp"

namespace paic {

// Natural-scale marginal means under the two hypothetical treatments.
struct MarginalPair {
  double mean_comparator = 0.0;
  double mean_reference = 0.0;
};

// Average of per-row predictions over the cohort, each arm in turn.
MarginalPair marginalize(const FitResult& fit, const ModelSpec& spec,
                         const SyntheticCohort& cohort);
MarginalPair marginalize(const Eigen::VectorXd& coefficients, Family family, Link link,
                         const DesignMatrix& comparator_design,
                         const DesignMatrix& reference_design);

struct PosteriorOptions {
  int burnin = 1000;
  int draws = 4000;
  int chains = 1;
  double prior_scale = 2.5;        // coefficient prior sd on the standardised scale
  double prior_intercept_sd = 10.0;
  double target_accept = 0.3;
};

struct PosteriorDraws {
  std::vector<std::string> names;  // coefficients, plus log_sigma for gaussian
  Eigen::MatrixXd draws;           // (chains*draws) x p
  double acceptance_rate = 0.0;
  Eigen::VectorXd rhat;            // split-chain proxy
  Eigen::VectorXd ess;             // autocorrelation-based effective draws
  int n_burnin = 0;
  int n_chains = 1;
};

// Adaptive random-walk Metropolis started and preconditioned at the Laplace
// approximation; normal priors, adaptation only during burn-in.
PosteriorDraws sample_posterior(const DesignMatrix& design, const Eigen::VectorXd& y,
                                Family family, Link link, const PosteriorOptions& options,
                                Rng& rng);

struct RubinPooled {
  double q_bar = 0.0;
  double u_bar = 0.0;
  double b = 0.0;
  double total_var = 0.0;
  double nu = 0.0;  // Barnard-Rubin degrees of freedom
  int m = 0;
};

RubinPooled rubin_pool(const Eigen::VectorXd& q, const Eigen::VectorXd& u, double nu_complete);

}  // namespace paic
