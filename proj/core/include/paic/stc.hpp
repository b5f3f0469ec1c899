#pragma once

#include <map>
#include <string>

#include "paic/glm.hpp"
#include "paic/trial_data.hpp"

namespace paic {

// Outcome regression with every PF and EM column shifted to the aggregate
// trial's mean profile; the treatment main effect is then the conditional
// contrast at that profile on the link scale.
struct StcFit {
  FitResult fit;
  int treatment_column = -1;
  std::map<std::string, double> target_means;
};

// Target means for the spec's covariates, read from the ALD (mean/prop).
// Throws a validation error naming the first covariate without a mean.
std::map<std::string, double> stc_target_means(const AldTable& ald, const ModelSpec& spec);

StcFit stc_fit(const IpdTable& ipd, const AldTable& ald, const ModelSpec& spec,
               const std::string& comparator);

// g^-1 of the linear predictor at the target profile under one arm.
double stc_absolute(const StcFit& stc, bool comparator_arm);

}  // namespace paic
