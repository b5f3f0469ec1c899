#include "paic/gcomp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "paic/errors.hpp"
#include "paic/stats.hpp"

namespace paic {

MarginalPair marginalize(const Eigen::VectorXd& coefficients, Family family, Link link,
                         const DesignMatrix& comparator_design,
                         const DesignMatrix& reference_design) {
  FitResult tmp;
  tmp.coefficients = coefficients;
  tmp.family = family;
  tmp.link = link;
  MarginalPair mp;
  mp.mean_comparator = predict_mean(tmp, comparator_design.X).mean();
  mp.mean_reference = predict_mean(tmp, reference_design.X).mean();
  return mp;
}

MarginalPair marginalize(const FitResult& fit, const ModelSpec& spec,
                         const SyntheticCohort& cohort) {
  const DesignMatrix comp = build_profile_design(cohort.names, cohort.covariates, spec, 1.0);
  const DesignMatrix ref = build_profile_design(cohort.names, cohort.covariates, spec, 0.0);
  return marginalize(fit.coefficients, fit.family, fit.link, comp, ref);
}

namespace {

// Unnormalised log posterior: likelihood plus independent normal priors.
struct LogPosterior {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& y;
  Family family;
  LinkFunction lf;
  Eigen::VectorXd prior_sd;  // per parameter
  bool has_sigma;            // gaussian: last parameter is log sigma
  double log_sigma_prior_mean = 0.0;
  double log_sigma_prior_sd = 10.0;

  double operator()(const Eigen::VectorXd& theta) const {
    const Eigen::Index p_lin = X.cols();
    const Eigen::VectorXd beta = theta.head(p_lin);
    const Eigen::VectorXd eta = X * beta;

    double ll = 0.0;
    if (family == Family::gaussian) {
      const double log_sigma = theta[p_lin];
      if (std::abs(log_sigma) > 300.0) return -std::numeric_limits<double>::infinity();
      const double sigma2 = std::exp(2.0 * log_sigma);
      const double rss = (y - eta).squaredNorm();
      ll = -0.5 * static_cast<double>(y.size()) * std::log(sigma2) - 0.5 * rss / sigma2;
      const double z = (log_sigma - log_sigma_prior_mean) / log_sigma_prior_sd;
      ll += -0.5 * z * z;
    } else {
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double mu = lf.mu(eta[i]);
        if (family == Family::binomial) {
          mu = std::clamp(mu, 1e-12, 1.0 - 1e-12);
          ll += y[i] * std::log(mu) + (1.0 - y[i]) * std::log(1.0 - mu);
        } else {
          mu = std::max(mu, 1e-12);
          ll += y[i] * std::log(mu) - mu;
        }
      }
    }
    for (Eigen::Index j = 0; j < p_lin; ++j) {
      const double z = theta[j] / prior_sd[j];
      ll += -0.5 * z * z;
    }
    return ll;
  }
};

}  // namespace

PosteriorDraws sample_posterior(const DesignMatrix& design, const Eigen::VectorXd& y,
                                Family family, Link link, const PosteriorOptions& options,
                                Rng& rng) {
  if (options.draws < 2) throw validation_error("sample_posterior: need at least 2 draws");
  if (options.chains < 1) throw validation_error("sample_posterior: need at least 1 chain");

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
  const FitResult mle = fit_glm(design, y, ones, family, link);  // Laplace centre

  const Eigen::Index p_lin = design.X.cols();
  const bool has_sigma = family == Family::gaussian;
  const Eigen::Index p = p_lin + (has_sigma ? 1 : 0);

  LogPosterior lp{design.X, y, family, LinkFunction{link}, Eigen::VectorXd(p_lin), has_sigma};
  for (Eigen::Index j = 0; j < p_lin; ++j) {
    if (j == 0) {
      lp.prior_sd[j] = options.prior_intercept_sd;
      continue;
    }
    double sd = stats::sample_sd(design.X.col(j));
    if (!(sd > 0.0)) sd = 1.0;
    lp.prior_sd[j] = options.prior_scale / sd;
  }
  const double sd_y = stats::sample_sd(y);
  if (has_sigma) lp.log_sigma_prior_mean = std::log(std::max(sd_y, 1e-8));

  Eigen::VectorXd theta0(p);
  theta0.head(p_lin) = mle.coefficients;
  Eigen::MatrixXd prop_cov = Eigen::MatrixXd::Zero(p, p);
  prop_cov.topLeftCorner(p_lin, p_lin) = mle.model_cov;
  if (has_sigma) {
    theta0[p_lin] = 0.5 * std::log(std::max(mle.dispersion, 1e-12));
    prop_cov(p_lin, p_lin) = 0.5 / static_cast<double>(y.size());
  }

  Eigen::LLT<Eigen::MatrixXd> llt(prop_cov +
                                  1e-12 * Eigen::MatrixXd::Identity(p, p));
  if (llt.info() != Eigen::Success)
    throw numeric_error("sample_posterior: Laplace proposal covariance not PSD");
  const Eigen::MatrixXd chol = llt.matrixL();

  const int total_kept = options.draws * options.chains;
  PosteriorDraws out;
  out.names = design.column_names;
  if (has_sigma) out.names.push_back("log_sigma");
  out.draws.resize(total_kept, p);
  out.n_burnin = options.burnin;
  out.n_chains = options.chains;

  long accepted_kept = 0;
  for (int chain = 0; chain < options.chains; ++chain) {
    Eigen::VectorXd theta = theta0;
    if (options.chains > 1) {
      for (Eigen::Index j = 0; j < p; ++j)
        theta[j] += 0.1 * rng.normal() * std::sqrt(std::max(prop_cov(j, j), 1e-12));
    }
    double lp_cur = lp(theta);
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(p)));

    const int total = options.burnin + options.draws;
    Eigen::VectorXd z(p);
    for (int t = 0; t < total; ++t) {
      for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
      const Eigen::VectorXd proposal = theta + std::exp(log_scale) * (chol * z);
      const double lp_prop = lp(proposal);
      const double log_alpha = lp_prop - lp_cur;
      const double accept_prob = std::isfinite(log_alpha) ? std::min(1.0, std::exp(std::min(log_alpha, 0.0)))
                                                          : 0.0;
      if (rng.uniform01() < accept_prob) {
        theta = proposal;
        lp_cur = lp_prop;
        if (t >= options.burnin) ++accepted_kept;
      }
      if (t < options.burnin) {
        // Robbins-Monro step toward the target acceptance rate
        const double gamma = std::pow(t + 1.0, -0.6);
        log_scale += gamma * (accept_prob - options.target_accept);
      } else {
        out.draws.row(chain * options.draws + (t - options.burnin)) = theta;
      }
    }
  }

  out.acceptance_rate = static_cast<double>(accepted_kept) / total_kept;
  if (out.acceptance_rate < 0.05)
    throw numeric_error("sample_posterior: acceptance rate collapsed (" +
                        std::to_string(out.acceptance_rate) + ") after adaptation");

  // split-chain R-hat and autocorrelation ESS per parameter
  const int n_groups = 2 * options.chains;
  const int group_len = options.draws / 2;
  out.rhat.resize(p);
  out.ess.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd group_mean(n_groups), group_var(n_groups);
    for (int g = 0; g < n_groups; ++g) {
      const int chain = g / 2;
      const int offset = chain * options.draws + (g % 2) * group_len;
      const Eigen::VectorXd seg = out.draws.col(j).segment(offset, group_len);
      group_mean[g] = seg.mean();
      group_var[g] = (seg.array() - group_mean[g]).square().sum() / (group_len - 1);
    }
    const double w = group_var.mean();
    const double mean_all = group_mean.mean();
    const double b = group_len *
                     (group_mean.array() - mean_all).square().sum() / (n_groups - 1);
    out.rhat[j] = (w > 0.0) ? std::sqrt(((group_len - 1.0) / group_len * w + b / group_len) / w)
                            : 1.0;

    // Geyer-style initial positive sequence on the pooled chain
    const Eigen::VectorXd col = out.draws.col(j);
    const double mu = col.mean();
    const Eigen::ArrayXd centred = col.array() - mu;
    const double c0 = centred.square().mean();
    double rho_sum = 0.0;
    if (c0 > 0.0) {
      const int max_lag = std::min<int>(total_kept - 2, 1000);
      for (int lag = 1; lag + 1 <= max_lag; lag += 2) {
        const int len1 = total_kept - lag;
        const int len2 = total_kept - lag - 1;
        const double r1 =
            (centred.head(len1) * centred.tail(len1)).mean() / c0;
        const double r2 =
            (centred.head(len2) * centred.tail(len2)).mean() / c0;
        if (r1 + r2 <= 0.0) break;
        rho_sum += r1 + r2;
      }
    }
    out.ess[j] = std::min<double>(total_kept, total_kept / (1.0 + 2.0 * rho_sum));
  }
  return out;
}

RubinPooled rubin_pool(const Eigen::VectorXd& q, const Eigen::VectorXd& u, double nu_complete) {
  const int m = static_cast<int>(q.size());
  if (m < 2) throw validation_error("rubin_pool: need at least 2 syntheses");
  if (u.size() != m) throw validation_error("rubin_pool: Q and U length mismatch");
  if ((u.array() < 0.0).any()) throw validation_error("rubin_pool: negative within variance");

  RubinPooled out;
  out.m = m;
  out.q_bar = q.mean();
  out.u_bar = u.mean();
  out.b = (q.array() - out.q_bar).square().sum() / (m - 1);
  out.total_var = out.u_bar + (1.0 + 1.0 / m) * out.b;

  // Barnard-Rubin small-sample degrees of freedom
  const double lambda = (out.total_var > 0.0) ? (1.0 + 1.0 / m) * out.b / out.total_var : 0.0;
  const double nu_obs =
      (nu_complete + 1.0) / (nu_complete + 3.0) * nu_complete * (1.0 - lambda);
  if (lambda <= 0.0) {
    out.nu = nu_obs;
  } else {
    const double nu_old = (m - 1.0) / (lambda * lambda);
    out.nu = 1.0 / (1.0 / nu_old + 1.0 / nu_obs);
  }
  if (!(out.nu > 0.0)) out.nu = 1.0;
  return out;
}

}  // namespace paic
