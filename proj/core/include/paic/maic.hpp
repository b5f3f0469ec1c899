#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "paic/glm.hpp"
#include "paic/trial_data.hpp"

namespace paic {

struct WeightSolution {
  Eigen::VectorXd beta;     // tilting coefficients on the original covariate scale
  Eigen::VectorXd weights;  // exp(beta' (x_i - target)), unnormalised
  double ess = 0.0;
  bool converged = false;
  double objective_value = 0.0;  // sum of weights at the solution
  int n_iterations = 0;
  double max_moment_error = 0.0;
};

// Minimises sum_i exp(beta' (x_i - target)) by Newton with Armijo
// backtracking; covariates are standardised internally for conditioning.
// Throws numeric_error("no covariate overlap ...") when a target mean lies
// outside the observed range or the objective is unbounded below.
WeightSolution estimate_weights(const Eigen::MatrixXd& X, const Eigen::VectorXd& target_means,
                                const std::vector<std::string>& names = {});

double effective_sample_size(const Eigen::VectorXd& w);

// Covariates entering the moment match: union of PFs and EMs, first moments.
std::vector<std::string> matched_covariate_set(const ModelSpec& spec);

// Weighted two-group regression outcome ~ intercept + treatment used for the
// MAIC contrast; errors when one arm carries (almost) no weight.
FitResult maic_two_group_fit(const IpdTable& ipd, const ModelSpec& spec,
                             const Eigen::VectorXd& weights, const std::string& comparator);

}  // namespace paic
