#pragma once

#include <map>
#include <string>
#include <vector>

#include "paic/copula.hpp"
#include "paic/rng.hpp"
#include "paic/scales.hpp"
#include "paic/trial_data.hpp"

namespace paic {

// Data-generating process for a matched pair of trials: patient-level
// comparator-vs-reference data plus an aggregate-only trial drawn from a
// shifted covariate population.
struct DgpCovariate {
  std::string name;
  bool prognostic = true;
  bool effect_modifier = false;
  MarginalDist dist = MarginalDist::norm;
  double ipd_mean = 0.0;
  double ipd_sd = 1.0;
  double ald_mean = 0.0;
  double ald_sd = 1.0;
};

struct TrialDgp {
  Family family = Family::binomial;
  Link link = Link::logit;
  std::string outcome_name = "y";
  std::string treatment_name = "trt";
  std::string ipd_comparator = "A";
  std::string ald_comparator = "B";
  std::string reference = "C";
  int n_ipd_per_arm = 100;
  int n_ald_per_arm = 100;
  double ipd_correlation = 0.0;  // exchangeable latent correlation
  double ald_correlation = 0.0;
  std::vector<DgpCovariate> covariates;
  double intercept = 0.0;
  std::map<std::string, double> pf_coefficients;
  double trt_ipd_comparator = 0.0;
  double trt_ald_comparator = 0.0;
  std::map<std::string, double> em_coefficients;  // shared across active arms
  double sigma = 1.0;                             // gaussian residual sd

  void validate() const;
};

struct TrialPair {
  IpdTable ipd;
  AldTable ald;
};

ModelSpec dgp_model_spec(const TrialDgp& dgp);

TrialPair simulate_trial_pair(const TrialDgp& dgp, Rng& rng);

// True marginal comparator-vs-comparator contrast in the aggregate trial's
// population, via a large simulated cohort.
double dgp_true_marginal(const TrialDgp& dgp, const Scale& scale, int n_oracle, Rng& rng);

// Dataset stem following <comp><ref>_<level>_<outcome>Y_<covariates>X.
std::string dgp_dataset_stem(const TrialDgp& dgp, bool ipd_level);

}  // namespace paic
