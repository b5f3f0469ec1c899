#include "paic/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "paic/errors.hpp"
#include "paic/glm.hpp"

namespace paic {

void TrialDgp::validate() const {
  if (covariates.empty()) throw validation_error("dgp: needs at least one covariate");
  if (n_ipd_per_arm < 2 || n_ald_per_arm < 2)
    throw validation_error("dgp: arm sizes must be at least 2");
  if (!family_link_supported(family, link))
    throw validation_error("dgp: unsupported family/link");
  if (family == Family::gaussian && !(sigma > 0.0))
    throw validation_error("dgp: sigma must be positive");
  if (std::abs(ipd_correlation) >= 1.0 || std::abs(ald_correlation) >= 1.0)
    throw validation_error("dgp: exchangeable correlation must lie in (-1,1)");
  for (const auto& c : covariates) {
    if (!c.prognostic && !c.effect_modifier)
      throw validation_error("dgp: covariate '" + c.name + "' has no role");
    if (c.dist != MarginalDist::bernoulli && (!(c.ipd_sd > 0.0) || !(c.ald_sd > 0.0)))
      throw validation_error("dgp: covariate '" + c.name + "' needs positive sds");
  }
  const auto labels = {ipd_comparator, ald_comparator, reference};
  for (const auto& l : labels)
    if (l.empty()) throw validation_error("dgp: empty treatment label");
}

ModelSpec dgp_model_spec(const TrialDgp& dgp) {
  ModelSpec spec;
  spec.outcome = dgp.outcome_name;
  spec.treatment = dgp.treatment_name;
  spec.family = dgp.family;
  spec.link = dgp.link;
  for (const auto& c : dgp.covariates) {
    if (c.prognostic) spec.prognostic_factors.push_back(c.name);
    if (c.effect_modifier) spec.effect_modifiers.push_back(c.name);
  }
  spec.validate();
  return spec;
}

namespace {

MarginalSpec dgp_marginals(const TrialDgp& dgp, bool ipd_population) {
  MarginalSpec spec;
  for (const auto& c : dgp.covariates) {
    spec.names.push_back(c.name);
    Marginal m;
    m.dist = c.dist;
    const double mean = ipd_population ? c.ipd_mean : c.ald_mean;
    const double sd = ipd_population ? c.ipd_sd : c.ald_sd;
    switch (c.dist) {
      case MarginalDist::norm:
        m.p1 = mean;
        m.p2 = sd;
        break;
      case MarginalDist::bernoulli:
        m.p1 = mean;
        break;
      case MarginalDist::gamma:
        m.p1 = (mean / sd) * (mean / sd);
        m.p2 = mean / (sd * sd);
        break;
      case MarginalDist::lognorm: {
        const double s2 = std::log1p((sd / mean) * (sd / mean));
        m.p1 = std::log(mean) - 0.5 * s2;
        m.p2 = std::sqrt(s2);
        break;
      }
    }
    m.validate(c.name);
    spec.marginals.push_back(m);
  }
  return spec;
}

CorrelationMatrix exchangeable(const std::vector<std::string>& names, double rho) {
  CorrelationMatrix c = CorrelationMatrix::identity(names);
  const int k = static_cast<int>(names.size());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) c.rho(i, j) = c.rho(j, i) = rho;
  return c;
}

Eigen::VectorXd linear_predictor(const TrialDgp& dgp, const SyntheticCohort& cohort,
                                 double trt_effect, bool active_arm) {
  const int n = static_cast<int>(cohort.covariates.rows());
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, dgp.intercept);
  for (std::size_t j = 0; j < cohort.names.size(); ++j) {
    const auto& name = cohort.names[j];
    if (const auto it = dgp.pf_coefficients.find(name); it != dgp.pf_coefficients.end())
      eta += it->second * cohort.covariates.col(static_cast<int>(j));
    if (active_arm) {
      if (const auto it = dgp.em_coefficients.find(name); it != dgp.em_coefficients.end())
        eta += it->second * cohort.covariates.col(static_cast<int>(j));
    }
  }
  if (active_arm) eta.array() += trt_effect;
  return eta;
}

Eigen::VectorXd draw_outcomes(const TrialDgp& dgp, const Eigen::VectorXd& eta, Rng& rng) {
  const LinkFunction lf{dgp.link};
  Eigen::VectorXd y(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double mu = lf.mu(eta[i]);
    switch (dgp.family) {
      case Family::binomial:
        y[i] = rng.bernoulli(std::clamp(mu, 0.0, 1.0));
        break;
      case Family::poisson:
        y[i] = static_cast<double>(rng.poisson(std::max(mu, 0.0)));
        break;
      case Family::gaussian:
        y[i] = rng.normal(mu, dgp.sigma);
        break;
    }
  }
  return y;
}

double sample_sd_vec(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

}  // namespace

TrialPair simulate_trial_pair(const TrialDgp& dgp, Rng& rng) {
  dgp.validate();
  const ModelSpec spec = dgp_model_spec(dgp);
  const auto cov_names = spec.covariates();

  // patient-level comparator-vs-reference trial
  const MarginalSpec ipd_marg = dgp_marginals(dgp, true);
  const CorrelationMatrix ipd_rho = exchangeable(ipd_marg.names, dgp.ipd_correlation);
  const int n_ipd = 2 * dgp.n_ipd_per_arm;
  SyntheticCohort ipd_cov = simulate_cohort(ipd_rho, ipd_marg, n_ipd, rng);

  std::vector<std::string> trt(n_ipd);
  Eigen::VectorXd y(n_ipd);
  {
    SyntheticCohort comp_rows{ipd_cov.names, ipd_cov.covariates.topRows(dgp.n_ipd_per_arm)};
    SyntheticCohort ref_rows{ipd_cov.names, ipd_cov.covariates.bottomRows(dgp.n_ipd_per_arm)};
    const Eigen::VectorXd eta_comp =
        linear_predictor(dgp, comp_rows, dgp.trt_ipd_comparator, true);
    const Eigen::VectorXd eta_ref = linear_predictor(dgp, ref_rows, 0.0, false);
    y.head(dgp.n_ipd_per_arm) = draw_outcomes(dgp, eta_comp, rng);
    y.tail(dgp.n_ipd_per_arm) = draw_outcomes(dgp, eta_ref, rng);
    for (int i = 0; i < dgp.n_ipd_per_arm; ++i) trt[i] = dgp.ipd_comparator;
    for (int i = dgp.n_ipd_per_arm; i < n_ipd; ++i) trt[i] = dgp.reference;
  }
  IpdTable ipd(ipd_cov.names, std::move(ipd_cov.covariates), std::move(trt), std::move(y),
               dgp.family);

  // aggregate-only trial, drawn at patient level then reduced
  const MarginalSpec ald_marg = dgp_marginals(dgp, false);
  const CorrelationMatrix ald_rho = exchangeable(ald_marg.names, dgp.ald_correlation);
  const int n_ald = 2 * dgp.n_ald_per_arm;
  const SyntheticCohort ald_cov = simulate_cohort(ald_rho, ald_marg, n_ald, rng);
  SyntheticCohort comp_rows{ald_cov.names, ald_cov.covariates.topRows(dgp.n_ald_per_arm)};
  SyntheticCohort ref_rows{ald_cov.names, ald_cov.covariates.bottomRows(dgp.n_ald_per_arm)};
  const Eigen::VectorXd y_comp =
      draw_outcomes(dgp, linear_predictor(dgp, comp_rows, dgp.trt_ald_comparator, true), rng);
  const Eigen::VectorXd y_ref =
      draw_outcomes(dgp, linear_predictor(dgp, ref_rows, 0.0, false), rng);

  std::vector<AldRecord> records;
  for (std::size_t j = 0; j < cov_names.size(); ++j) {
    const Eigen::VectorXd col = ald_cov.covariates.col(static_cast<int>(j));
    const bool binary = dgp.covariates[j].dist == MarginalDist::bernoulli;
    records.push_back({cov_names[j], binary ? "prop" : "mean", col.mean(), std::nullopt});
    if (!binary) records.push_back({cov_names[j], "sd", sample_sd_vec(col), std::nullopt});
  }
  auto outcome_records = [&](const Eigen::VectorXd& arm_y, const std::string& label) {
    records.push_back({dgp.outcome_name, "mean", arm_y.mean(), label});
    records.push_back({dgp.outcome_name, "sd", sample_sd_vec(arm_y), label});
    if (dgp.family != Family::gaussian)
      records.push_back({dgp.outcome_name, "sum", arm_y.sum(), label});
    records.push_back({std::nullopt, "N", static_cast<double>(arm_y.size()), label});
  };
  outcome_records(y_comp, dgp.ald_comparator);
  outcome_records(y_ref, dgp.reference);

  return TrialPair{std::move(ipd), AldTable::from_records(std::move(records))};
}

double dgp_true_marginal(const TrialDgp& dgp, const Scale& scale, int n_oracle, Rng& rng) {
  dgp.validate();
  const MarginalSpec marg = dgp_marginals(dgp, false);
  const CorrelationMatrix rho = exchangeable(marg.names, dgp.ald_correlation);
  const SyntheticCohort cohort = simulate_cohort(rho, marg, n_oracle, rng);

  const LinkFunction lf{dgp.link};
  const Eigen::VectorXd eta_a = linear_predictor(dgp, cohort, dgp.trt_ipd_comparator, true);
  const Eigen::VectorXd eta_b = linear_predictor(dgp, cohort, dgp.trt_ald_comparator, true);
  double mean_a = 0.0, mean_b = 0.0;
  for (Eigen::Index i = 0; i < eta_a.size(); ++i) {
    mean_a += lf.mu(eta_a[i]);
    mean_b += lf.mu(eta_b[i]);
  }
  mean_a /= static_cast<double>(n_oracle);
  mean_b /= static_cast<double>(n_oracle);
  return contrast_from_means(scale, mean_a, mean_b);
}

std::string dgp_dataset_stem(const TrialDgp& dgp, bool ipd_level) {
  std::string outcome_tag;
  switch (dgp.family) {
    case Family::binomial: outcome_tag = "bin"; break;
    case Family::poisson: outcome_tag = "count"; break;
    case Family::gaussian: outcome_tag = "cont"; break;
  }
  bool any_bin = false, any_cont = false;
  for (const auto& c : dgp.covariates)
    (c.dist == MarginalDist::bernoulli ? any_bin : any_cont) = true;
  const std::string cov_tag = (any_bin && any_cont) ? "mixed" : (any_bin ? "bin" : "cont");
  const std::string arms = ipd_level ? dgp.ipd_comparator + dgp.reference
                                     : dgp.ald_comparator + dgp.reference;
  return arms + "_" + (ipd_level ? "IPD" : "ALD") + "_" + outcome_tag + "Y_" + cov_tag + "X";
}

}  // namespace paic
