#include "paic/stc.hpp"

#include "paic/errors.hpp"

namespace paic {

std::map<std::string, double> stc_target_means(const AldTable& ald, const ModelSpec& spec) {
  std::map<std::string, double> targets;
  for (const auto& name : spec.covariates()) {
    try {
      targets[name] = population_statistic(ald, name, "mean");
    } catch (const validation_error&) {
      throw validation_error("stc: ALD has no mean (or prop) record for covariate '" + name +
                             "'");
    }
  }
  return targets;
}

StcFit stc_fit(const IpdTable& ipd, const AldTable& ald, const ModelSpec& spec,
               const std::string& comparator) {
  StcFit out;
  out.target_means = stc_target_means(ald, spec);
  const DesignMatrix design = build_design(ipd, spec, comparator, &out.target_means);
  out.treatment_column = design.treatment_column;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ipd.n_rows());
  out.fit = fit_glm(design, ipd.outcomes(), ones, spec.family, spec.link);
  return out;
}

double stc_absolute(const StcFit& stc, bool comparator_arm) {
  // centred design: the intercept is the reference-arm linear predictor at
  // the target profile; adding the treatment coefficient gives the other arm
  const LinkFunction lf{stc.fit.link};
  double eta = stc.fit.coefficients[0];
  if (comparator_arm) eta += stc.fit.coefficients[stc.treatment_column];
  return lf.mu(eta);
}

}  // namespace paic
