#pragma once

#include <optional>
#include <string>

#include "paic/trial_data.hpp"

namespace paic {

enum class ScaleKind {
  log_odds,
  risk_difference,
  probit_difference,
  log_rr_cloglog,
  log_rr_log,
  log_relative_risk,
  rate_difference,
  mean_difference,
};

struct Scale {
  ScaleKind kind = ScaleKind::log_odds;

  std::string name() const;
  static Scale parse(const std::string& token);
  static Scale default_for(Family f);

  bool valid_for(Family f) const;
  // identity-transform scales (differences of natural-scale means)
  bool is_difference() const;
  // link to refit the outcome model with, when it differs from the spec's
  std::optional<Link> implied_link(Family f) const;

  double transform(double mean) const;  // g
  double inverse(double value) const;   // g^-1
};

// Point estimate with its variance, tagged with the scale it lives on.
struct EstimateWithVar {
  double estimate = 0.0;
  double variance = 0.0;
  ScaleKind scale = ScaleKind::log_odds;
};

// Per-arm aggregate summaries pulled out of an ALD table.
struct ArmSummary {
  double n = 0.0;
  std::optional<double> events;  // binary/count sum
  std::optional<double> mean;
  std::optional<double> sd;
};

ArmSummary arm_summary(const AldTable& ald, const std::string& outcome_name,
                       const std::string& arm, Family family);

// Natural-scale arm mean: events/n for binary, sum/n (or mean) for counts,
// mean for continuous outcomes.
double arm_natural_mean(const ArmSummary& s, Family family, const std::string& arm);
// Natural-scale variance of that mean.
double arm_natural_variance(const ArmSummary& s, Family family, const std::string& arm);

double apply_link(const Scale& scale, double mean);
double invert_link(const Scale& scale, double value);
void validate_scale(const Scale& scale, Family family);

// Aggregate-side contrast comparator-minus-reference with the per-arm
// variance terms summed.
EstimateWithVar ald_contrast(const AldTable& ald, const Scale& scale,
                             const std::string& outcome_name, const std::string& comparator,
                             const std::string& reference, Family family);

double contrast_from_means(const Scale& scale, double mean_comparator, double mean_reference);

struct AbsoluteEstimate {
  double value = 0.0;
  bool clamped = false;
};

// Comparator arm mean implied by a reference mean and a relative contrast;
// out-of-domain results on difference scales are clamped and flagged.
AbsoluteEstimate absolute_from_contrast(double reference_mean, const EstimateWithVar& contrast);

}  // namespace paic
