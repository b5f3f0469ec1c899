#include "paic/scales.hpp"

#include <cmath>

#include "paic/errors.hpp"
#include "paic/stats.hpp"

namespace paic {

std::string Scale::name() const {
  switch (kind) {
    case ScaleKind::log_odds: return "log_odds";
    case ScaleKind::risk_difference: return "risk_difference";
    case ScaleKind::probit_difference: return "probit_difference";
    case ScaleKind::log_rr_cloglog: return "log_rr_cloglog";
    case ScaleKind::log_rr_log: return "log_rr_log";
    case ScaleKind::log_relative_risk: return "log_relative_risk";
    case ScaleKind::rate_difference: return "rate_difference";
    case ScaleKind::mean_difference: return "mean_difference";
  }
  return "?";
}

Scale Scale::parse(const std::string& token) {
  if (token == "log_odds" || token == "log-odds") return {ScaleKind::log_odds};
  if (token == "risk_difference") return {ScaleKind::risk_difference};
  if (token == "probit_difference") return {ScaleKind::probit_difference};
  if (token == "log_rr_cloglog") return {ScaleKind::log_rr_cloglog};
  if (token == "log_rr_log") return {ScaleKind::log_rr_log};
  if (token == "log_relative_risk") return {ScaleKind::log_relative_risk};
  if (token == "rate_difference") return {ScaleKind::rate_difference};
  if (token == "mean_difference") return {ScaleKind::mean_difference};
  throw validation_error("unknown scale '" + token + "'");
}

Scale Scale::default_for(Family f) {
  switch (f) {
    case Family::binomial: return {ScaleKind::log_odds};
    case Family::poisson: return {ScaleKind::log_relative_risk};
    case Family::gaussian: return {ScaleKind::mean_difference};
  }
  return {ScaleKind::log_odds};
}

bool Scale::valid_for(Family f) const {
  switch (f) {
    case Family::binomial:
      return kind == ScaleKind::log_odds || kind == ScaleKind::risk_difference ||
             kind == ScaleKind::probit_difference || kind == ScaleKind::log_rr_cloglog ||
             kind == ScaleKind::log_rr_log;
    case Family::poisson:
      return kind == ScaleKind::log_relative_risk || kind == ScaleKind::rate_difference;
    case Family::gaussian:
      return kind == ScaleKind::mean_difference || kind == ScaleKind::log_odds ||
             kind == ScaleKind::log_relative_risk;
  }
  return false;
}

bool Scale::is_difference() const {
  return kind == ScaleKind::risk_difference || kind == ScaleKind::rate_difference ||
         kind == ScaleKind::mean_difference;
}

std::optional<Link> Scale::implied_link(Family f) const {
  if (f == Family::binomial) {
    switch (kind) {
      case ScaleKind::log_odds: return Link::logit;
      case ScaleKind::probit_difference: return Link::probit;
      case ScaleKind::log_rr_cloglog: return Link::cloglog;
      case ScaleKind::log_rr_log: return Link::log;
      default: return std::nullopt;
    }
  }
  if (f == Family::poisson && kind == ScaleKind::log_relative_risk) return Link::log;
  if (f == Family::gaussian && kind == ScaleKind::mean_difference) return Link::identity;
  return std::nullopt;
}

double Scale::transform(double mean) const {
  switch (kind) {
    case ScaleKind::log_odds:
      if (!(mean > 0.0 && mean < 1.0))
        throw numeric_error("log_odds transform needs a mean in (0,1)");
      return std::log(mean / (1.0 - mean));
    case ScaleKind::probit_difference:
      if (!(mean > 0.0 && mean < 1.0))
        throw numeric_error("probit transform needs a mean in (0,1)");
      return stats::norm_quantile(mean);
    case ScaleKind::log_rr_cloglog:
      if (!(mean > 0.0 && mean < 1.0))
        throw numeric_error("cloglog transform needs a mean in (0,1)");
      return std::log(-std::log1p(-mean));
    case ScaleKind::log_rr_log:
    case ScaleKind::log_relative_risk:
      if (!(mean > 0.0)) throw numeric_error("log transform needs a positive mean");
      return std::log(mean);
    case ScaleKind::risk_difference:
    case ScaleKind::rate_difference:
    case ScaleKind::mean_difference:
      return mean;
  }
  return mean;
}

double Scale::inverse(double value) const {
  switch (kind) {
    case ScaleKind::log_odds:
      return value >= 0.0 ? 1.0 / (1.0 + std::exp(-value))
                          : std::exp(value) / (1.0 + std::exp(value));
    case ScaleKind::probit_difference:
      return stats::norm_cdf(value);
    case ScaleKind::log_rr_cloglog:
      return -std::expm1(-std::exp(value));
    case ScaleKind::log_rr_log:
    case ScaleKind::log_relative_risk:
      return std::exp(value);
    case ScaleKind::risk_difference:
    case ScaleKind::rate_difference:
    case ScaleKind::mean_difference:
      return value;
  }
  return value;
}

double apply_link(const Scale& scale, double mean) { return scale.transform(mean); }

double invert_link(const Scale& scale, double value) { return scale.inverse(value); }

void validate_scale(const Scale& scale, Family family) {
  if (!scale.valid_for(family))
    throw validation_error("scale '" + scale.name() + "' is not valid for a " +
                           to_string(family) + " outcome");
}

ArmSummary arm_summary(const AldTable& ald, const std::string& outcome_name,
                       const std::string& arm, Family family) {
  ArmSummary s;
  s.n = ald.arm_size(arm);
  if (s.n < 1.0) throw validation_error("ALD arm '" + arm + "' has size below 1");
  s.events = ald.try_lookup(outcome_name, "sum", arm);
  s.mean = ald.try_lookup(outcome_name, "mean", arm);
  s.sd = ald.try_lookup(outcome_name, "sd", arm);

  switch (family) {
    case Family::binomial:
      if (!s.events && !s.mean)
        throw validation_error("ALD arm '" + arm + "': binary outcome needs 'sum' or 'mean'");
      if (s.events && (*s.events < 0.0 || *s.events > s.n))
        throw validation_error("ALD arm '" + arm + "': event count outside [0, N]");
      break;
    case Family::poisson:
      if (!s.events && !s.mean)
        throw validation_error("ALD arm '" + arm + "': count outcome needs 'sum' or 'mean'");
      break;
    case Family::gaussian:
      if (!s.mean)
        throw validation_error("ALD arm '" + arm + "': continuous outcome needs 'mean'");
      break;
  }
  return s;
}

double arm_natural_mean(const ArmSummary& s, Family family, const std::string& arm) {
  switch (family) {
    case Family::binomial:
    case Family::poisson:
      // counts are preferred over the (usually rounded) reported mean
      if (s.events) return *s.events / s.n;
      return *s.mean;
    case Family::gaussian:
      return *s.mean;
  }
  throw validation_error("arm_natural_mean: unsupported family for arm '" + arm + "'");
}

double arm_natural_variance(const ArmSummary& s, Family family, const std::string& arm) {
  const double mean = arm_natural_mean(s, family, arm);
  switch (family) {
    case Family::binomial:
      return mean * (1.0 - mean) / s.n;
    case Family::poisson:
      return mean / s.n;
    case Family::gaussian:
      if (!s.sd) throw validation_error("ALD arm '" + arm + "': continuous outcome needs 'sd'");
      return (*s.sd) * (*s.sd) / s.n;
  }
  throw validation_error("arm_natural_variance: unsupported family for arm '" + arm + "'");
}

namespace {

double arm_scale_variance(const Scale& scale, const ArmSummary& s, Family family,
                          const std::string& arm) {
  const double n = s.n;
  auto events_or_throw = [&]() {
    const double y = s.events ? *s.events : arm_natural_mean(s, family, arm) * n;
    if (y <= 0.0 || y >= n)
      throw numeric_error("ALD arm '" + arm +
                          "': event count at 0 or N; consider a continuity correction before "
                          "requesting this scale");
    return y;
  };

  switch (scale.kind) {
    case ScaleKind::log_odds: {
      if (family == Family::gaussian) {
        // variance of a logit-transformed mean for data mapped to (0,1)
        return M_PI * M_PI / (3.0 * n);
      }
      const double y = events_or_throw();
      return 1.0 / y + 1.0 / (n - y);
    }
    case ScaleKind::probit_difference: {
      const double y = events_or_throw();
      return 1.0 / y + 1.0 / (n - y);
    }
    case ScaleKind::log_rr_cloglog:
    case ScaleKind::log_rr_log: {
      const double y = events_or_throw();
      return 1.0 / y - 1.0 / n;
    }
    case ScaleKind::risk_difference: {
      const double p = arm_natural_mean(s, family, arm);
      if (!(p >= 0.0 && p <= 1.0))
        throw numeric_error("ALD arm '" + arm + "': proportion outside [0,1]");
      return p * (1.0 - p) / n;
    }
    case ScaleKind::log_relative_risk: {
      const double m = arm_natural_mean(s, family, arm);
      if (m == 0.0) throw numeric_error("ALD arm '" + arm + "': zero mean on a log scale");
      return 1.0 / (n * std::abs(m));
    }
    case ScaleKind::rate_difference: {
      const double m = arm_natural_mean(s, family, arm);
      return m / n;
    }
    case ScaleKind::mean_difference: {
      if (!s.sd) throw validation_error("ALD arm '" + arm + "': mean_difference needs 'sd'");
      return (*s.sd) * (*s.sd) / n;
    }
  }
  throw numeric_error("unhandled scale");
}

}  // namespace

double contrast_from_means(const Scale& scale, double mean_comparator, double mean_reference) {
  return scale.transform(mean_comparator) - scale.transform(mean_reference);
}

EstimateWithVar ald_contrast(const AldTable& ald, const Scale& scale,
                             const std::string& outcome_name, const std::string& comparator,
                             const std::string& reference, Family family) {
  validate_scale(scale, family);
  const ArmSummary comp = arm_summary(ald, outcome_name, comparator, family);
  const ArmSummary ref = arm_summary(ald, outcome_name, reference, family);

  EstimateWithVar out;
  out.scale = scale.kind;
  // variance first: degenerate cells raise the continuity-correction hint
  out.variance = arm_scale_variance(scale, comp, family, comparator) +
                 arm_scale_variance(scale, ref, family, reference);
  out.estimate = contrast_from_means(scale, arm_natural_mean(comp, family, comparator),
                                     arm_natural_mean(ref, family, reference));
  return out;
}

AbsoluteEstimate absolute_from_contrast(double reference_mean, const EstimateWithVar& contrast) {
  const Scale scale{contrast.scale};
  AbsoluteEstimate out;
  if (scale.is_difference()) {
    out.value = reference_mean + contrast.estimate;
    if (contrast.scale == ScaleKind::risk_difference) {
      if (out.value < 0.0) {
        out.value = 0.0;
        out.clamped = true;
      } else if (out.value > 1.0) {
        out.value = 1.0;
        out.clamped = true;
      }
    } else if (contrast.scale == ScaleKind::rate_difference && out.value < 0.0) {
      out.value = 0.0;
      out.clamped = true;
    }
    return out;
  }
  out.value = scale.inverse(scale.transform(reference_mean) + contrast.estimate);
  return out;
}

}  // namespace paic
