#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "paic/errors.hpp"
#include "paic/trial_data.hpp"

namespace paic {

// Link evaluated pointwise; binomial-type means are clamped away from {0,1}.
struct LinkFunction {
  Link link;
  double eta(double mu) const;        // g
  double mu(double eta) const;        // g^-1
  double dmu_deta(double eta) const;
  double d2mu_deta2(double eta) const;
};

double family_variance(Family f, double mu);
double family_variance_prime(Family f, double mu);

// Model matrix: intercept, PF main effects, treatment indicator, EM x
// treatment products, in that order.
struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd X;
  int treatment_column = -1;
};

// centering (covariate -> target mean) shifts PF and EM columns before the
// interaction products are formed.
DesignMatrix build_design(const IpdTable& ipd, const ModelSpec& spec,
                          const std::string& comparator,
                          const std::map<std::string, double>* centering = nullptr);

// Same columns built over an external covariate matrix with the treatment
// indicator fixed to 0 or 1.
DesignMatrix build_profile_design(const std::vector<std::string>& covariate_names,
                                  const Eigen::MatrixXd& covariate_values,
                                  const ModelSpec& spec, double treatment_value);

struct FitResult {
  std::vector<std::string> column_names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd model_cov;     // inverse expected information (x dispersion)
  Eigen::MatrixXd sandwich_cov;  // HC0: bread^-1 meat bread^-1
  double log_likelihood = 0.0;
  double deviance = 0.0;
  bool converged = false;
  int n_iterations = 0;
  double dispersion = 1.0;  // weighted mean squared residual (gaussian), else 1
  double score_inf_norm = 0.0;
  std::vector<double> deviance_history;  // one entry per IRLS iteration
  Family family = Family::gaussian;
  Link link = Link::identity;

  double coefficient(const std::string& name) const;
};

// Non-convergence / separation; carries the last iterate.
class glm_error : public numeric_error {
 public:
  glm_error(const std::string& msg, FitResult last_iterate)
      : numeric_error(msg), last(std::move(last_iterate)) {}
  FitResult last;
};

// Weighted IRLS fit. Deviance tolerance 1e-10 relative, at most 50
// iterations, step halving whenever a step increases the deviance.
FitResult fit_glm(const DesignMatrix& design, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights, Family family, Link link);
FitResult fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights, Family family, Link link);

// HC0 sandwich: observed-information bread, per-row score outer products
// (weights squared) as meat.
Eigen::MatrixXd sandwich_cov(const FitResult& fit, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

// Delta-method variance of a scalar transform of the coefficients; gradient
// by central differences with step max(1e-6, 1e-6|theta_j|).
double delta_method_var(const std::function<double(const Eigen::VectorXd&)>& transform,
                        const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov);

Eigen::VectorXd predict_mean(const FitResult& fit, const Eigen::MatrixXd& X_new);
Eigen::VectorXd predict_mean(const FitResult& fit, const DesignMatrix& design);

}  // namespace paic
