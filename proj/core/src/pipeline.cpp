#include "paic/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "paic/bootstrap.hpp"
#include "paic/errors.hpp"
#include "paic/formula.hpp"
#include "paic/glm.hpp"
#include "paic/maic.hpp"
#include "paic/rng.hpp"
#include "paic/stats.hpp"
#include "paic/stc.hpp"

namespace paic {

StrategyKind parse_strategy(const std::string& token) {
  if (token == "maic") return StrategyKind::maic;
  if (token == "stc") return StrategyKind::stc;
  if (token == "gcomp_ml") return StrategyKind::gcomp_ml;
  if (token == "gcomp_bayes") return StrategyKind::gcomp_bayes;
  if (token == "mim") return StrategyKind::mim;
  throw validation_error("unknown strategy '" + token + "'");
}

std::string to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::maic: return "maic";
    case StrategyKind::stc: return "stc";
    case StrategyKind::gcomp_ml: return "gcomp_ml";
    case StrategyKind::gcomp_bayes: return "gcomp_bayes";
    case StrategyKind::mim: return "mim";
  }
  return "?";
}

std::string method_name(StrategyKind s) {
  switch (s) {
    case StrategyKind::maic: return "MAIC";
    case StrategyKind::stc: return "STC";
    case StrategyKind::gcomp_ml: return "GCOMP_ML";
    case StrategyKind::gcomp_bayes: return "GCOMP_BAYES";
    case StrategyKind::mim: return "MIM";
  }
  return "?";
}

VarMethod parse_var_method(const std::string& token) {
  if (token == "sample") return VarMethod::sample;
  if (token == "sandwich") return VarMethod::sandwich;
  if (token == "rubin") return VarMethod::rubin;
  throw validation_error("unknown var_method '" + token + "'");
}

std::string to_string(VarMethod v) {
  switch (v) {
    case VarMethod::sample: return "sample";
    case VarMethod::sandwich: return "sandwich";
    case VarMethod::rubin: return "rubin";
  }
  return "?";
}

void RunConfig::validate() const {
  spec.validate();
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw validation_error("CI level must lie strictly between 0 and 1");
  if (options.cohort_size < 1) throw validation_error("N (cohort size) must be at least 1");
  if (options.n_boot < 2) throw validation_error("n_boot must be at least 2");
  if (options.n_imp < 2) throw validation_error("n_imp (M) must be at least 2");
  if (options.workers < 1) throw validation_error("workers must be at least 1");
  if (var_method) {
    if (*var_method == VarMethod::rubin && strategy != StrategyKind::mim)
      throw validation_error("var_method 'rubin' is only available with the mim strategy");
    if (*var_method == VarMethod::sandwich && strategy != StrategyKind::maic &&
        strategy != StrategyKind::stc && strategy != StrategyKind::gcomp_ml)
      throw validation_error(
          "var_method 'sandwich' is only available with maic, stc and gcomp_ml");
    if (strategy == StrategyKind::mim && *var_method != VarMethod::rubin)
      throw validation_error("the mim strategy pools with Rubin's rules; use var_method 'rubin'");
  }
}

const EffectRow& ComparisonResult::contrast(const std::string& label) const {
  for (const auto& row : contrasts)
    if (row.label == label) return row;
  throw validation_error("no contrast row '" + label + "'");
}

const EffectRow& ComparisonResult::absolute_row(const std::string& label) const {
  for (const auto& row : absolute)
    if (row.label == label) return row;
  throw validation_error("no absolute row '" + label + "'");
}

namespace {

struct AnalysisContext {
  const IpdTable& ipd;
  const AldTable& ald;
  ModelSpec spec;  // link possibly refit to the scale's implied link
  Scale scale;
  Roles roles;
  VarMethod var_method;
  std::uint64_t seed;
  const StrategyOptions& options;
  double ci_level;
};

struct StrategyOutcome {
  EstimateWithVar contrast;
  double mean_comp = 0.0;
  double var_mean_comp = 0.0;
  double mean_ref = 0.0;
  double var_mean_ref = 0.0;
  std::optional<double> nu_contrast;
  std::optional<double> nu_mean_comp;
  std::optional<double> nu_mean_ref;
  ModelExtras extras;
};

FitSummary summarize_fit(const FitResult& fit) {
  FitSummary s;
  s.columns = fit.column_names;
  s.coefficients = fit.coefficients;
  s.se = fit.model_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  s.log_likelihood = fit.log_likelihood;
  s.deviance = fit.deviance;
  s.converged = fit.converged;
  s.n_iterations = fit.n_iterations;
  s.dispersion = fit.dispersion;
  return s;
}

// contrast / arm-mean transforms of the two-group fit coefficients
double two_group_contrast(const Eigen::VectorXd& theta, Link link, const Scale& scale) {
  const LinkFunction lf{link};
  return contrast_from_means(scale, lf.mu(theta[0] + theta[1]), lf.mu(theta[0]));
}

CorrelationMatrix align_rho(const CorrelationMatrix& rho,
                            const std::vector<std::string>& covariates) {
  rho.validate();
  const int k = static_cast<int>(covariates.size());
  CorrelationMatrix out = CorrelationMatrix::identity(covariates);
  for (int i = 0; i < k; ++i) {
    const auto it_i = std::find(rho.names.begin(), rho.names.end(), covariates[i]);
    if (it_i == rho.names.end())
      throw validation_error("rho matrix is missing covariate '" + covariates[i] + "'");
    const int ri = static_cast<int>(it_i - rho.names.begin());
    for (int j = 0; j < k; ++j) {
      const auto it_j = std::find(rho.names.begin(), rho.names.end(), covariates[j]);
      const int rj = static_cast<int>(it_j - rho.names.begin());
      out.rho(i, j) = rho.rho(ri, rj);
    }
  }
  return out;
}

struct CohortBundle {
  SyntheticCohort cohort;
  CorrelationMatrix rho;
  MarginalSpec marginals;
  DesignMatrix comparator_design;
  DesignMatrix reference_design;
};

CohortBundle make_cohort(const AnalysisContext& ctx) {
  CohortBundle b;
  const auto covariates = ctx.spec.covariates();
  if (covariates.empty()) {
    b.rho = CorrelationMatrix::identity({});
    b.cohort.names = {};
    b.cohort.covariates = Eigen::MatrixXd(ctx.options.cohort_size, 0);
  } else {
    b.rho = ctx.options.rho ? align_rho(*ctx.options.rho, covariates)
                            : correlation_from_ipd(ctx.ipd, covariates);
    b.marginals = resolve_marginals(ctx.ald, covariates, ctx.options.marginal_distns,
                                    ctx.options.marginal_params);
    Rng rng = Rng::substream(ctx.seed, streams::cohort, 0);
    b.cohort = simulate_cohort(b.rho, b.marginals, ctx.options.cohort_size, rng);
  }
  b.comparator_design = build_profile_design(b.cohort.names, b.cohort.covariates, ctx.spec, 1.0);
  b.reference_design = build_profile_design(b.cohort.names, b.cohort.covariates, ctx.spec, 0.0);
  return b;
}

void attach_cohort_extras(ModelExtras& extras, const CohortBundle& b, int cohort_size) {
  extras.rho = b.rho;
  extras.cohort_size = cohort_size;
  for (std::size_t j = 0; j < b.marginals.names.size(); ++j) {
    const auto& name = b.marginals.names[j];
    const auto& m = b.marginals.marginals[j];
    extras.marginal_distns[name] = to_string(m.dist);
    switch (m.dist) {
      case MarginalDist::norm:
        extras.marginal_params[name] = {{"mean", m.p1}, {"sd", m.p2}};
        break;
      case MarginalDist::gamma:
        extras.marginal_params[name] = {{"shape", m.p1}, {"rate", m.p2}};
        break;
      case MarginalDist::bernoulli:
        extras.marginal_params[name] = {{"p", m.p1}};
        break;
      case MarginalDist::lognorm:
        extras.marginal_params[name] = {{"meanlog", m.p1}, {"sdlog", m.p2}};
        break;
    }
  }
}

StrategyOutcome run_maic(const AnalysisContext& ctx) {
  const auto cov_names = matched_covariate_set(ctx.spec);
  const int q = static_cast<int>(cov_names.size());

  auto covariate_matrix = [&](const IpdTable& t) {
    Eigen::MatrixXd x(t.n_rows(), q);
    for (int j = 0; j < q; ++j) x.col(j) = t.covariate(cov_names[j]);
    return x;
  };
  Eigen::VectorXd targets(q);
  for (int j = 0; j < q; ++j) targets[j] = population_statistic(ctx.ald, cov_names[j], "mean");

  const WeightSolution ws = estimate_weights(covariate_matrix(ctx.ipd), targets, cov_names);
  const FitResult fit = maic_two_group_fit(ctx.ipd, ctx.spec, ws.weights,
                                           ctx.roles.ipd_comparator);

  const LinkFunction lf{ctx.spec.link};
  StrategyOutcome out;
  out.mean_ref = lf.mu(fit.coefficients[0]);
  out.mean_comp = lf.mu(fit.coefficients[0] + fit.coefficients[1]);
  out.contrast.scale = ctx.scale.kind;
  out.contrast.estimate = contrast_from_means(ctx.scale, out.mean_comp, out.mean_ref);

  if (ctx.var_method == VarMethod::sample) {
    auto statistic = [&](const IpdTable& t) {
      const WeightSolution ws_b = estimate_weights(covariate_matrix(t), targets);
      const FitResult fit_b = maic_two_group_fit(t, ctx.spec, ws_b.weights,
                                                 ctx.roles.ipd_comparator);
      const double ref = lf.mu(fit_b.coefficients[0]);
      const double comp = lf.mu(fit_b.coefficients[0] + fit_b.coefficients[1]);
      Eigen::VectorXd v(3);
      v << contrast_from_means(ctx.scale, comp, ref), comp, ref;
      return v;
    };
    const BootstrapPlan plan{ctx.options.n_boot, ctx.seed, ctx.options.workers};
    const BootstrapSummary boot = bootstrap_estimates(ctx.ipd, statistic, plan);
    out.contrast.variance = boot.variance[0];
    out.var_mean_comp = boot.variance[1];
    out.var_mean_ref = boot.variance[2];
    out.extras.n_boot = ctx.options.n_boot;
  } else {  // sandwich
    const auto& cov = fit.sandwich_cov;
    if (ctx.scale.implied_link(ctx.spec.family) == std::optional<Link>(ctx.spec.link)) {
      out.contrast.variance = cov(1, 1);
    } else {
      out.contrast.variance = delta_method_var(
          [&](const Eigen::VectorXd& th) { return two_group_contrast(th, ctx.spec.link, ctx.scale); },
          fit.coefficients, cov);
    }
    out.var_mean_comp = delta_method_var(
        [&](const Eigen::VectorXd& th) { return lf.mu(th[0] + th[1]); }, fit.coefficients, cov);
    out.var_mean_ref = delta_method_var(
        [&](const Eigen::VectorXd& th) { return lf.mu(th[0]); }, fit.coefficients, cov);
  }

  out.extras.weights = ws.weights;
  out.extras.ess = ws.ess;
  out.extras.fit = summarize_fit(fit);
  if (ws.ess < 0.3 * ctx.ipd.n_rows())
    out.extras.warnings.push_back(
        "MAIC effective sample size is below 30% of the IPD rows (ESS = " +
        std::to_string(ws.ess) + ")");
  return out;
}

StrategyOutcome run_stc(const AnalysisContext& ctx) {
  const StcFit stc = stc_fit(ctx.ipd, ctx.ald, ctx.spec, ctx.roles.ipd_comparator);
  const int tcol = stc.treatment_column;
  const LinkFunction lf{ctx.spec.link};

  StrategyOutcome out;
  out.mean_ref = stc_absolute(stc, false);
  out.mean_comp = stc_absolute(stc, true);
  out.contrast.scale = ctx.scale.kind;
  out.contrast.estimate = contrast_from_means(ctx.scale, out.mean_comp, out.mean_ref);

  const Eigen::MatrixXd& cov =
      (ctx.var_method == VarMethod::sandwich) ? stc.fit.sandwich_cov : stc.fit.model_cov;
  if (ctx.scale.implied_link(ctx.spec.family) == std::optional<Link>(ctx.spec.link)) {
    out.contrast.variance = cov(tcol, tcol);  // coefficient variance, exactly
  } else {
    out.contrast.variance = delta_method_var(
        [&](const Eigen::VectorXd& th) {
          return contrast_from_means(ctx.scale, lf.mu(th[0] + th[tcol]), lf.mu(th[0]));
        },
        stc.fit.coefficients, cov);
  }
  out.var_mean_comp = delta_method_var(
      [&](const Eigen::VectorXd& th) { return lf.mu(th[0] + th[tcol]); },
      stc.fit.coefficients, cov);
  out.var_mean_ref = delta_method_var(
      [&](const Eigen::VectorXd& th) { return lf.mu(th[0]); }, stc.fit.coefficients, cov);

  out.extras.fit = summarize_fit(stc.fit);
  return out;
}

StrategyOutcome run_gcomp_ml(const AnalysisContext& ctx) {
  const CohortBundle bundle = make_cohort(ctx);
  const DesignMatrix design = build_design(ctx.ipd, ctx.spec, ctx.roles.ipd_comparator);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ctx.ipd.n_rows());
  const FitResult fit = fit_glm(design, ctx.ipd.outcomes(), ones, ctx.spec.family, ctx.spec.link);

  auto means_at = [&](const Eigen::VectorXd& theta) {
    return marginalize(theta, ctx.spec.family, ctx.spec.link, bundle.comparator_design,
                       bundle.reference_design);
  };

  const MarginalPair mp = means_at(fit.coefficients);
  StrategyOutcome out;
  out.mean_comp = mp.mean_comparator;
  out.mean_ref = mp.mean_reference;
  out.contrast.scale = ctx.scale.kind;
  out.contrast.estimate = contrast_from_means(ctx.scale, mp.mean_comparator, mp.mean_reference);

  if (ctx.var_method == VarMethod::sample) {
    // refit on each resample, re-marginalise over the fixed cohort
    auto statistic = [&](const IpdTable& t) {
      const DesignMatrix d_b = build_design(t, ctx.spec, ctx.roles.ipd_comparator);
      const Eigen::VectorXd w_b = Eigen::VectorXd::Ones(t.n_rows());
      const FitResult fit_b = fit_glm(d_b, t.outcomes(), w_b, ctx.spec.family, ctx.spec.link);
      const MarginalPair mp_b = means_at(fit_b.coefficients);
      Eigen::VectorXd v(3);
      v << contrast_from_means(ctx.scale, mp_b.mean_comparator, mp_b.mean_reference),
          mp_b.mean_comparator, mp_b.mean_reference;
      return v;
    };
    const BootstrapPlan plan{ctx.options.n_boot, ctx.seed, ctx.options.workers};
    const BootstrapSummary boot = bootstrap_estimates(ctx.ipd, statistic, plan);
    out.contrast.variance = boot.variance[0];
    out.var_mean_comp = boot.variance[1];
    out.var_mean_ref = boot.variance[2];
    out.extras.n_boot = ctx.options.n_boot;
  } else {  // sandwich + numerical delta method across the standardisation
    const auto& cov = fit.sandwich_cov;
    out.contrast.variance = delta_method_var(
        [&](const Eigen::VectorXd& th) {
          const MarginalPair m = means_at(th);
          return contrast_from_means(ctx.scale, m.mean_comparator, m.mean_reference);
        },
        fit.coefficients, cov);
    out.var_mean_comp = delta_method_var(
        [&](const Eigen::VectorXd& th) { return means_at(th).mean_comparator; },
        fit.coefficients, cov);
    out.var_mean_ref = delta_method_var(
        [&](const Eigen::VectorXd& th) { return means_at(th).mean_reference; },
        fit.coefficients, cov);
  }

  out.extras.fit = summarize_fit(fit);
  attach_cohort_extras(out.extras, bundle, ctx.options.cohort_size);
  return out;
}

Eigen::VectorXd empirical_interval(Eigen::VectorXd draws, double level) {
  std::sort(draws.data(), draws.data() + draws.size());
  auto quantile = [&](double p) {
    const double h = p * (draws.size() - 1);
    const auto lo = static_cast<Eigen::Index>(std::floor(h));
    const auto hi = std::min<Eigen::Index>(lo + 1, draws.size() - 1);
    return draws[lo] + (h - lo) * (draws[hi] - draws[lo]);
  };
  Eigen::VectorXd out(2);
  out << quantile(0.5 * (1.0 - level)), quantile(0.5 * (1.0 + level));
  return out;
}

StrategyOutcome run_gcomp_bayes(const AnalysisContext& ctx) {
  const CohortBundle bundle = make_cohort(ctx);
  const DesignMatrix design = build_design(ctx.ipd, ctx.spec, ctx.roles.ipd_comparator);
  Rng rng = Rng::substream(ctx.seed, streams::posterior, 0);
  const PosteriorDraws draws = sample_posterior(design, ctx.ipd.outcomes(), ctx.spec.family,
                                                ctx.spec.link, ctx.options.posterior, rng);

  const int s_total = static_cast<int>(draws.draws.rows());
  const int p_lin = static_cast<int>(design.X.cols());
  Eigen::VectorXd delta(s_total), mean_comp(s_total), mean_ref(s_total);
  for (int m = 0; m < s_total; ++m) {
    const Eigen::VectorXd beta = draws.draws.row(m).head(p_lin);
    const MarginalPair mp = marginalize(beta, ctx.spec.family, ctx.spec.link,
                                        bundle.comparator_design, bundle.reference_design);
    mean_comp[m] = mp.mean_comparator;
    mean_ref[m] = mp.mean_reference;
    delta[m] = contrast_from_means(ctx.scale, mp.mean_comparator, mp.mean_reference);
  }

  StrategyOutcome out;
  out.contrast.scale = ctx.scale.kind;
  out.contrast.estimate = delta.mean();
  out.contrast.variance = stats::sample_variance(delta);
  out.mean_comp = mean_comp.mean();
  out.var_mean_comp = stats::sample_variance(mean_comp);
  out.mean_ref = mean_ref.mean();
  out.var_mean_ref = stats::sample_variance(mean_ref);

  PosteriorSummary ps;
  ps.acceptance_rate = draws.acceptance_rate;
  ps.burnin = draws.n_burnin;
  ps.chains = draws.n_chains;
  ps.draws_kept = s_total;
  const Eigen::VectorXd interval = empirical_interval(delta, ctx.ci_level);
  ps.ci_lower = interval[0];
  ps.ci_upper = interval[1];
  ps.parameters = draws.names;
  ps.rhat = draws.rhat;
  ps.ess = draws.ess;
  ps.draws = draws.draws;
  out.extras.posterior = ps;
  attach_cohort_extras(out.extras, bundle, ctx.options.cohort_size);
  return out;
}

StrategyOutcome run_mim(const AnalysisContext& ctx) {
  const int m_syn = ctx.options.n_imp;
  const int n_cohort = ctx.options.cohort_size;

  const auto covariates = ctx.spec.covariates();
  CorrelationMatrix rho = covariates.empty()
                              ? CorrelationMatrix::identity({})
                              : (ctx.options.rho ? align_rho(*ctx.options.rho, covariates)
                                                 : correlation_from_ipd(ctx.ipd, covariates));
  MarginalSpec marginals;
  if (!covariates.empty())
    marginals = resolve_marginals(ctx.ald, covariates, ctx.options.marginal_distns,
                                  ctx.options.marginal_params);

  const DesignMatrix design = build_design(ctx.ipd, ctx.spec, ctx.roles.ipd_comparator);
  Rng rng = Rng::substream(ctx.seed, streams::posterior, 0);
  const PosteriorDraws draws = sample_posterior(design, ctx.ipd.outcomes(), ctx.spec.family,
                                                ctx.spec.link, ctx.options.posterior, rng);
  const int s_total = static_cast<int>(draws.draws.rows());
  const int p_lin = static_cast<int>(design.X.cols());
  const LinkFunction lf{ctx.spec.link};
  const bool scale_is_link =
      ctx.scale.implied_link(ctx.spec.family) == std::optional<Link>(ctx.spec.link);

  Eigen::VectorXd q(m_syn), u(m_syn);
  Eigen::VectorXd q_comp(m_syn), u_comp(m_syn), q_ref(m_syn), u_ref(m_syn);

  for (int m = 0; m < m_syn; ++m) {
    const int draw_index = static_cast<int>((m + 0.5) * s_total / m_syn);
    const Eigen::VectorXd theta = draws.draws.row(std::min(draw_index, s_total - 1));
    const Eigen::VectorXd beta = theta.head(p_lin);
    const double sigma = (ctx.spec.family == Family::gaussian)
                             ? std::exp(theta[p_lin])
                             : 1.0;

    Rng rng_m = Rng::substream(ctx.seed, streams::mim, static_cast<std::uint64_t>(m));
    SyntheticCohort cohort;
    if (covariates.empty()) {
      cohort.covariates = Eigen::MatrixXd(n_cohort, 0);
    } else {
      cohort = simulate_cohort(rho, marginals, n_cohort, rng_m);
    }
    const DesignMatrix x_comp =
        build_profile_design(cohort.names, cohort.covariates, ctx.spec, 1.0);
    const DesignMatrix x_ref =
        build_profile_design(cohort.names, cohort.covariates, ctx.spec, 0.0);

    Eigen::VectorXd mu_comp(n_cohort), mu_ref(n_cohort);
    {
      const Eigen::VectorXd eta_c = x_comp.X * beta;
      const Eigen::VectorXd eta_r = x_ref.X * beta;
      for (int i = 0; i < n_cohort; ++i) {
        mu_comp[i] = lf.mu(eta_c[i]);
        mu_ref[i] = lf.mu(eta_r[i]);
      }
    }

    auto draw_synthetic = [&](Eigen::VectorXd& y_out) {
      y_out.resize(2 * n_cohort);
      for (int i = 0; i < n_cohort; ++i) {
        switch (ctx.spec.family) {
          case Family::binomial:
            y_out[i] = rng_m.bernoulli(std::clamp(mu_comp[i], 0.0, 1.0));
            break;
          case Family::poisson:
            y_out[i] = static_cast<double>(rng_m.poisson(std::max(mu_comp[i], 0.0)));
            break;
          case Family::gaussian:
            y_out[i] = rng_m.normal(mu_comp[i], sigma);
            break;
        }
      }
      for (int i = 0; i < n_cohort; ++i) {
        switch (ctx.spec.family) {
          case Family::binomial:
            y_out[n_cohort + i] = rng_m.bernoulli(std::clamp(mu_ref[i], 0.0, 1.0));
            break;
          case Family::poisson:
            y_out[n_cohort + i] = static_cast<double>(rng_m.poisson(std::max(mu_ref[i], 0.0)));
            break;
          case Family::gaussian:
            y_out[n_cohort + i] = rng_m.normal(mu_ref[i], sigma);
            break;
        }
      }
    };

    DesignMatrix marginal_design;
    marginal_design.column_names = {"(Intercept)", ctx.spec.treatment};
    marginal_design.treatment_column = 1;
    marginal_design.X.resize(2 * n_cohort, 2);
    marginal_design.X.col(0).setOnes();
    marginal_design.X.col(1).setZero();
    marginal_design.X.col(1).head(n_cohort).setOnes();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2 * n_cohort);

    FitResult marginal_fit;
    bool fitted = false;
    for (int attempt = 0; attempt < 2 && !fitted; ++attempt) {
      Eigen::VectorXd y_syn;
      draw_synthetic(y_syn);
      if (ctx.spec.family != Family::gaussian) {
        // a single-class arm has no finite marginal coefficient; redraw once
        const double s1 = y_syn.head(n_cohort).sum();
        const double s0 = y_syn.tail(n_cohort).sum();
        const bool degenerate_comp =
            s1 == 0.0 || (ctx.spec.family == Family::binomial && s1 == n_cohort);
        const bool degenerate_ref =
            s0 == 0.0 || (ctx.spec.family == Family::binomial && s0 == n_cohort);
        if (degenerate_comp || degenerate_ref) continue;
      }
      try {
        marginal_fit = fit_glm(marginal_design, y_syn, ones, ctx.spec.family, ctx.spec.link);
        fitted = true;
      } catch (const glm_error&) {
        // redraw once
      }
    }
    if (!fitted)
      throw numeric_error("mim: synthesis " + std::to_string(m + 1) +
                          " produced a degenerate outcome twice");

    const Eigen::VectorXd& th = marginal_fit.coefficients;
    const Eigen::MatrixXd& cov = marginal_fit.model_cov;
    if (scale_is_link) {
      q[m] = th[1];
      u[m] = cov(1, 1);
    } else {
      q[m] = two_group_contrast(th, ctx.spec.link, ctx.scale);
      u[m] = delta_method_var(
          [&](const Eigen::VectorXd& t) { return two_group_contrast(t, ctx.spec.link, ctx.scale); },
          th, cov);
    }
    q_comp[m] = lf.mu(th[0] + th[1]);
    u_comp[m] = delta_method_var(
        [&](const Eigen::VectorXd& t) { return lf.mu(t[0] + t[1]); }, th, cov);
    q_ref[m] = lf.mu(th[0]);
    u_ref[m] = delta_method_var(
        [&](const Eigen::VectorXd& t) { return lf.mu(t[0]); }, th, cov);
  }

  const double nu_complete = 2.0 * n_cohort - 2.0;
  const RubinPooled pooled = rubin_pool(q, u, nu_complete);
  const RubinPooled pooled_comp = rubin_pool(q_comp, u_comp, nu_complete);
  const RubinPooled pooled_ref = rubin_pool(q_ref, u_ref, nu_complete);

  StrategyOutcome out;
  out.contrast.scale = ctx.scale.kind;
  out.contrast.estimate = pooled.q_bar;
  out.contrast.variance = pooled.total_var;
  out.nu_contrast = pooled.nu;
  out.mean_comp = pooled_comp.q_bar;
  out.var_mean_comp = pooled_comp.total_var;
  out.nu_mean_comp = pooled_comp.nu;
  out.mean_ref = pooled_ref.q_bar;
  out.var_mean_ref = pooled_ref.total_var;
  out.nu_mean_ref = pooled_ref.nu;

  RubinSummary rs;
  rs.pooled = pooled;
  rs.q = q;
  rs.u = u;
  out.extras.rubin = rs;
  out.extras.n_imp = m_syn;
  out.extras.rho = rho;
  out.extras.cohort_size = n_cohort;
  if (!covariates.empty()) {
    for (std::size_t j = 0; j < marginals.names.size(); ++j)
      out.extras.marginal_distns[marginals.names[j]] = to_string(marginals.marginals[j].dist);
  }
  return out;
}

Roles resolve_roles(const RunConfig& config, const IpdTable& ipd, const AldTable& ald) {
  const auto ipd_labels = ipd.treatment_labels();
  const auto ald_labels = ald.arm_labels();
  if (ald_labels.size() != 2)
    throw validation_error("ALD must describe exactly two arms, found " +
                           std::to_string(ald_labels.size()));

  Roles roles;
  roles.ref = config.ref_trt;
  if (roles.ref.empty()) {
    for (const auto& l : ipd_labels)
      if (std::find(ald_labels.begin(), ald_labels.end(), l) != ald_labels.end()) {
        if (!roles.ref.empty())
          throw validation_error("cannot infer ref_trt: both IPD labels appear in the ALD");
        roles.ref = l;
      }
    if (roles.ref.empty())
      throw validation_error("cannot infer ref_trt: no common label between IPD and ALD");
  }
  if (std::find(ipd_labels.begin(), ipd_labels.end(), roles.ref) == ipd_labels.end())
    throw validation_error("ref_trt '" + roles.ref + "' not present in the IPD");
  if (std::find(ald_labels.begin(), ald_labels.end(), roles.ref) == ald_labels.end())
    throw validation_error("ref_trt '" + roles.ref + "' not present in the ALD");

  roles.ipd_comparator = config.ipd_comp;
  if (roles.ipd_comparator.empty())
    roles.ipd_comparator = (ipd_labels[0] == roles.ref) ? ipd_labels[1] : ipd_labels[0];
  if (roles.ipd_comparator == roles.ref ||
      std::find(ipd_labels.begin(), ipd_labels.end(), roles.ipd_comparator) == ipd_labels.end())
    throw validation_error("ipd_comp '" + roles.ipd_comparator + "' invalid for the IPD");

  roles.ald_comparator = config.ald_comp;
  if (roles.ald_comparator.empty())
    roles.ald_comparator = (ald_labels[0] == roles.ref) ? ald_labels[1] : ald_labels[0];
  if (roles.ald_comparator == roles.ref ||
      std::find(ald_labels.begin(), ald_labels.end(), roles.ald_comparator) == ald_labels.end())
    throw validation_error("ald_comp '" + roles.ald_comparator + "' invalid for the ALD");
  return roles;
}

EffectRow make_row(const std::string& label, double estimate, double variance, double ci_level,
                   std::optional<double> t_df = std::nullopt) {
  EffectRow row;
  row.label = label;
  row.estimate = estimate;
  row.variance = variance;
  row.se = std::sqrt(std::max(variance, 0.0));
  const double quantile = t_df ? stats::t_quantile(0.5 * (1.0 + ci_level), *t_df)
                               : stats::norm_quantile(0.5 * (1.0 + ci_level));
  row.lower = estimate - quantile * row.se;
  row.upper = estimate + quantile * row.se;
  return row;
}

}  // namespace

ComparisonResult run_analysis(const RunConfig& config) {
  if (config.ipd_path.empty() || config.ald_path.empty())
    throw validation_error("run_analysis: ipd and ald paths are required");
  const IpdTable ipd = parse_ipd(config.ipd_path, config.spec);
  const AldTable ald = parse_ald(config.ald_path);
  return run_analysis(config, ipd, ald);
}

ComparisonResult run_analysis(const RunConfig& config, const IpdTable& ipd, const AldTable& ald) {
  config.validate();

  VarMethod var_method;
  if (config.var_method) {
    var_method = *config.var_method;
  } else {
    var_method = (config.strategy == StrategyKind::mim) ? VarMethod::rubin : VarMethod::sample;
  }

  const Roles roles = resolve_roles(config, ipd, ald);
  const Scale scale = config.scale ? *config.scale : Scale::default_for(config.spec.family);
  validate_scale(scale, config.spec.family);

  ModelSpec spec = config.spec;
  if (const auto implied = scale.implied_link(spec.family);
      implied && *implied != spec.link && family_link_supported(spec.family, *implied)) {
    spec.link = *implied;  // refit on the scale's own link
  }

  const AnalysisContext ctx{ipd,  ald,  spec,       scale, roles,
                            var_method, config.seed, config.options, config.ci_level};

  StrategyOutcome outcome;
  switch (config.strategy) {
    case StrategyKind::maic: outcome = run_maic(ctx); break;
    case StrategyKind::stc: outcome = run_stc(ctx); break;
    case StrategyKind::gcomp_ml: outcome = run_gcomp_ml(ctx); break;
    case StrategyKind::gcomp_bayes: outcome = run_gcomp_bayes(ctx); break;
    case StrategyKind::mim: outcome = run_mim(ctx); break;
  }

  const EstimateWithVar bc = ald_contrast(ald, scale, spec.outcome, roles.ald_comparator,
                                          roles.ref, spec.family);
  const EstimateWithVar& ac = outcome.contrast;

  ComparisonResult result;
  const std::string ab_label = roles.ipd_comparator + roles.ald_comparator;
  const std::string ac_label = roles.ipd_comparator + roles.ref;
  const std::string bc_label = roles.ald_comparator + roles.ref;

  // variance additivity is exact by construction: Var(AB) = Var(AC) + Var(BC)
  result.contrasts.push_back(make_row(ab_label, ac.estimate - bc.estimate,
                                      ac.variance + bc.variance, config.ci_level,
                                      outcome.nu_contrast));
  result.contrasts.push_back(
      make_row(ac_label, ac.estimate, ac.variance, config.ci_level, outcome.nu_contrast));
  result.contrasts.push_back(make_row(bc_label, bc.estimate, bc.variance, config.ci_level));

  const ArmSummary ald_arm = arm_summary(ald, spec.outcome, roles.ald_comparator, spec.family);
  const double b_mean = arm_natural_mean(ald_arm, spec.family, roles.ald_comparator);
  const double b_var = arm_natural_variance(ald_arm, spec.family, roles.ald_comparator);

  result.absolute.push_back(make_row(roles.ipd_comparator, outcome.mean_comp,
                                     outcome.var_mean_comp, config.ci_level,
                                     outcome.nu_mean_comp));
  result.absolute.push_back(make_row(roles.ald_comparator, b_mean, b_var, config.ci_level));
  result.absolute.push_back(make_row(roles.ref, outcome.mean_ref, outcome.var_mean_ref,
                                     config.ci_level, outcome.nu_mean_ref));

  result.meta.strategy = to_string(config.strategy);
  result.meta.scale = scale.name();
  result.meta.family = to_string(spec.family);
  result.meta.link = to_string(spec.link);
  result.meta.formula = formula_string(config.spec);
  result.meta.roles = roles;
  result.meta.ci_level = config.ci_level;
  result.meta.var_method = to_string(var_method);
  result.meta.seed = config.seed;

  result.model = std::move(outcome.extras);
  result.model.method_name = method_name(config.strategy);
  return result;
}

namespace {

std::string trim_kv(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw validation_error("config: '" + key + "' is not a number: " + v);
  return out;
}

long to_long(const std::string& v, const std::string& key) {
  const double d = to_double(v, key);
  if (std::abs(d - std::round(d)) > 1e-9)
    throw validation_error("config: '" + key + "' must be an integer: " + v);
  return static_cast<long>(std::llround(d));
}

std::map<std::string, double> parse_param_list(const std::string& value,
                                               const std::string& key) {
  // "shape=44.4, rate=0.63" (comma or whitespace separated)
  std::map<std::string, double> out;
  std::string token;
  std::istringstream in(value);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    std::istringstream parts(piece);
    while (parts >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos)
        throw validation_error("config: '" + key + "' expects name=value pairs");
      out[trim_kv(token.substr(0, eq))] = to_double(trim_kv(token.substr(eq + 1)), key);
    }
  }
  if (out.empty()) throw validation_error("config: '" + key + "' has no parameters");
  return out;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_kv(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw validation_error("config line " + std::to_string(lineno) + ": expected key = value");
    kv[trim_kv(t.substr(0, eq))] = trim_kv(t.substr(eq + 1));
  }
  return kv;
}

CorrelationMatrix read_correlation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open rho file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim_kv(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(trim_kv(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(trim_kv(cur));
    rows.push_back(std::move(cells));
  }
  if (rows.size() < 2) throw validation_error("rho file must have a header and matrix rows");
  CorrelationMatrix c;
  c.names = rows[0];
  const int k = static_cast<int>(c.names.size());
  if (static_cast<int>(rows.size()) != k + 1)
    throw validation_error("rho file: expected " + std::to_string(k) + " matrix rows");
  c.rho.resize(k, k);
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(rows[i + 1].size()) != k)
      throw validation_error("rho file: ragged matrix row");
    for (int j = 0; j < k; ++j) c.rho(i, j) = to_double(rows[i + 1][j], "rho");
  }
  c.validate();
  return c;
}

RunConfig config_from_map(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };

  RunConfig config;
  if (const auto v = get("ipd")) config.ipd_path = *v;
  if (const auto v = get("ald")) config.ald_path = *v;
  if (const auto v = get("strategy")) config.strategy = parse_strategy(*v);

  const auto formula = get("formula");
  if (!formula) throw validation_error("config: 'formula' is required");
  const Family family = parse_family(get("family").value_or("binomial"));
  const Link link = get("link") ? parse_link(*get("link")) : default_link(family);
  config.spec = spec_from_formula(*formula, family, link, get("trt_var").value_or(""));

  if (const auto v = get("scale")) config.scale = Scale::parse(*v);
  if (const auto v = get("ref_trt")) config.ref_trt = *v;
  if (const auto v = get("ipd_comp")) config.ipd_comp = *v;
  if (const auto v = get("ald_comp")) config.ald_comp = *v;
  if (const auto v = get("ci")) config.ci_level = to_double(*v, "ci");
  if (const auto v = get("var_method")) config.var_method = parse_var_method(*v);
  if (const auto v = get("seed")) config.seed = static_cast<std::uint64_t>(to_long(*v, "seed"));

  if (const auto v = get("n_boot")) config.options.n_boot = static_cast<int>(to_long(*v, "n_boot"));
  if (const auto v = get("N")) config.options.cohort_size = static_cast<int>(to_long(*v, "N"));
  if (const auto v = get("n_imp")) config.options.n_imp = static_cast<int>(to_long(*v, "n_imp"));
  if (const auto v = get("M")) config.options.n_imp = static_cast<int>(to_long(*v, "M"));
  if (const auto v = get("workers")) config.options.workers = static_cast<int>(to_long(*v, "workers"));
  if (const auto v = get("rho")) config.options.rho = read_correlation_csv(*v);
  if (const auto v = get("prior_scale")) config.options.posterior.prior_scale = to_double(*v, "prior_scale");
  if (const auto v = get("prior_intercept_sd"))
    config.options.posterior.prior_intercept_sd = to_double(*v, "prior_intercept_sd");
  if (const auto v = get("burnin")) config.options.posterior.burnin = static_cast<int>(to_long(*v, "burnin"));
  if (const auto v = get("draws")) config.options.posterior.draws = static_cast<int>(to_long(*v, "draws"));
  if (const auto v = get("chains")) config.options.posterior.chains = static_cast<int>(to_long(*v, "chains"));
  if (const auto v = get("target_accept"))
    config.options.posterior.target_accept = to_double(*v, "target_accept");

  for (const auto& [key, value] : kv) {
    if (key.rfind("marginal_distn.", 0) == 0) {
      config.options.marginal_distns[key.substr(15)] = value;
    } else if (key.rfind("marginal_params.", 0) == 0) {
      config.options.marginal_params[key.substr(16)] = parse_param_list(value, key);
    }
  }
  return config;
}

}  // namespace paic
