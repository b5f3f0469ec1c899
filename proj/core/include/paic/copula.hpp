#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "paic/rng.hpp"
#include "paic/trial_data.hpp"

namespace paic {

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd rho;

  static CorrelationMatrix identity(const std::vector<std::string>& names);
  void validate() const;  // square, symmetric, unit diagonal
};

CorrelationMatrix correlation_from_ipd(const IpdTable& ipd,
                                       const std::vector<std::string>& covariates);

enum class MarginalDist { norm, gamma, bernoulli, lognorm };

MarginalDist parse_marginal_dist(const std::string& token);
std::string to_string(MarginalDist d);

struct Marginal {
  MarginalDist dist = MarginalDist::norm;
  // norm: mean/sd, gamma: shape/rate, bernoulli: p/-, lognorm: meanlog/sdlog
  double p1 = 0.0;
  double p2 = 1.0;

  double quantile(double u) const;
  double cdf(double x) const;
  double mean() const;
  double sd() const;
  void validate(const std::string& name) const;
};

struct MarginalSpec {
  std::vector<std::string> names;
  std::vector<Marginal> marginals;
};

// Method-of-moments parameters from ALD summaries; manual parameter
// overrides win over the ALD, and unnamed covariates default to normal.
MarginalSpec resolve_marginals(const AldTable& ald, const std::vector<std::string>& covariates,
                               const std::map<std::string, std::string>& distn_overrides = {},
                               const std::map<std::string, std::map<std::string, double>>&
                                   param_overrides = {});

struct SyntheticCohort {
  std::vector<std::string> names;
  Eigen::MatrixXd covariates;  // N x K
};

// Latent MVN draws through the probability integral transform onto the
// marginal quantile functions; deterministic given the rng state.
SyntheticCohort simulate_cohort(const CorrelationMatrix& rho, const MarginalSpec& marginals,
                                int n, Rng& rng);

}  // namespace paic
