#include "paic/glm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "paic/stats.hpp"

namespace paic {

namespace {

constexpr double kMeanEps = 1e-12;
constexpr double kDevTol = 1e-10;
constexpr double kScoreTol = 1e-8;
constexpr int kMaxIter = 50;

double clamp_mean(Family f, double mu) {
  switch (f) {
    case Family::binomial:
      return std::clamp(mu, kMeanEps, 1.0 - kMeanEps);
    case Family::poisson:
      return std::clamp(mu, kMeanEps, 1e300);
    case Family::gaussian:
      return mu;
  }
  return mu;
}

double unit_deviance(Family f, double y, double mu) {
  switch (f) {
    case Family::gaussian: {
      const double r = y - mu;
      return r * r;
    }
    case Family::binomial: {
      double d = 0.0;
      if (y > 0.0) d += y * std::log(y / mu);
      if (y < 1.0) d += (1.0 - y) * std::log((1.0 - y) / (1.0 - mu));
      return 2.0 * d;
    }
    case Family::poisson: {
      if (y > 0.0) return 2.0 * (y * std::log(y / mu) - (y - mu));
      return 2.0 * mu;
    }
  }
  return 0.0;
}

}  // namespace

double LinkFunction::eta(double m) const {
  switch (link) {
    case Link::identity: return m;
    case Link::logit: return std::log(m / (1.0 - m));
    case Link::log: return std::log(m);
    case Link::probit: return stats::norm_quantile(m);
    case Link::cloglog: return std::log(-std::log1p(-m));
  }
  return m;
}

double LinkFunction::mu(double e) const {
  switch (link) {
    case Link::identity: return e;
    case Link::logit:
      return e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
    case Link::log: return std::exp(std::min(e, 700.0));
    case Link::probit: return stats::norm_cdf(e);
    case Link::cloglog: return -std::expm1(-std::exp(std::min(e, 700.0)));
  }
  return e;
}

double LinkFunction::dmu_deta(double e) const {
  switch (link) {
    case Link::identity: return 1.0;
    case Link::logit: {
      const double m = mu(e);
      return m * (1.0 - m);
    }
    case Link::log: return std::exp(std::min(e, 700.0));
    case Link::probit: return stats::norm_pdf(e);
    case Link::cloglog: {
      const double ee = std::exp(std::min(e, 700.0));
      return std::exp(std::min(e, 700.0) - ee);
    }
  }
  return 1.0;
}

double LinkFunction::d2mu_deta2(double e) const {
  switch (link) {
    case Link::identity: return 0.0;
    case Link::logit: {
      const double m = mu(e);
      return m * (1.0 - m) * (1.0 - 2.0 * m);
    }
    case Link::log: return std::exp(std::min(e, 700.0));
    case Link::probit: return -e * stats::norm_pdf(e);
    case Link::cloglog: {
      const double ee = std::exp(std::min(e, 700.0));
      return std::exp(std::min(e, 700.0) - ee) * (1.0 - ee);
    }
  }
  return 0.0;
}

double family_variance(Family f, double mu) {
  switch (f) {
    case Family::gaussian: return 1.0;
    case Family::binomial: return mu * (1.0 - mu);
    case Family::poisson: return mu;
  }
  return 1.0;
}

double family_variance_prime(Family f, double mu) {
  switch (f) {
    case Family::gaussian: return 0.0;
    case Family::binomial: return 1.0 - 2.0 * mu;
    case Family::poisson: return 1.0;
  }
  return 0.0;
}

DesignMatrix build_design(const IpdTable& ipd, const ModelSpec& spec,
                          const std::string& comparator,
                          const std::map<std::string, double>* centering) {
  const int n = ipd.n_rows();
  const auto& pfs = spec.prognostic_factors;
  const auto& ems = spec.effect_modifiers;
  const int p = 2 + static_cast<int>(pfs.size()) + static_cast<int>(ems.size());

  DesignMatrix d;
  d.X.resize(n, p);
  d.column_names.reserve(p);
  int col = 0;

  d.column_names.emplace_back("(Intercept)");
  d.X.col(col++).setOnes();

  auto shift_of = [&](const std::string& name) {
    if (!centering) return 0.0;
    const auto it = centering->find(name);
    return it == centering->end() ? 0.0 : it->second;
  };

  for (const auto& pf : pfs) {
    d.column_names.push_back(pf);
    d.X.col(col++) = ipd.covariate(pf).array() - shift_of(pf);
  }

  const Eigen::VectorXd trt = ipd.treatment_indicator(comparator);
  d.treatment_column = col;
  d.column_names.push_back(spec.treatment);
  d.X.col(col++) = trt;

  for (const auto& em : ems) {
    d.column_names.push_back(spec.treatment + ":" + em);
    d.X.col(col++) = (ipd.covariate(em).array() - shift_of(em)) * trt.array();
  }
  return d;
}

DesignMatrix build_profile_design(const std::vector<std::string>& covariate_names,
                                  const Eigen::MatrixXd& covariate_values,
                                  const ModelSpec& spec, double treatment_value) {
  const int n = static_cast<int>(covariate_values.rows());
  auto col_of = [&](const std::string& name) {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end())
      throw validation_error("profile design: missing covariate '" + name + "'");
    return static_cast<int>(it - covariate_names.begin());
  };

  const auto& pfs = spec.prognostic_factors;
  const auto& ems = spec.effect_modifiers;
  const int p = 2 + static_cast<int>(pfs.size()) + static_cast<int>(ems.size());

  DesignMatrix d;
  d.X.resize(n, p);
  int col = 0;
  d.column_names.emplace_back("(Intercept)");
  d.X.col(col++).setOnes();
  for (const auto& pf : pfs) {
    d.column_names.push_back(pf);
    d.X.col(col++) = covariate_values.col(col_of(pf));
  }
  d.treatment_column = col;
  d.column_names.push_back(spec.treatment);
  d.X.col(col++).setConstant(treatment_value);
  for (const auto& em : ems) {
    d.column_names.push_back(spec.treatment + ":" + em);
    d.X.col(col++) = covariate_values.col(col_of(em)) * treatment_value;
  }
  return d;
}

double FitResult::coefficient(const std::string& name) const {
  const auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw validation_error("no coefficient named '" + name + "'");
  return coefficients[it - column_names.begin()];
}

namespace {

Eigen::MatrixXd invert_psd(const Eigen::MatrixXd& a, const char* what) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= dmax * 1e-12)
    throw numeric_error(std::string("singular ") + what);
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

double log_likelihood_at(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& w, double dispersion) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    switch (family) {
      case Family::gaussian: {
        const double r = y[i] - mu[i];
        ll += 0.5 * (std::log(w[i] / (2.0 * M_PI * dispersion)) - w[i] * r * r / dispersion);
        break;
      }
      case Family::binomial:
        ll += w[i] * (y[i] * std::log(mu[i]) + (1.0 - y[i]) * std::log(1.0 - mu[i]));
        break;
      case Family::poisson:
        ll += w[i] * (y[i] * std::log(mu[i]) - mu[i] - std::lgamma(y[i] + 1.0));
        break;
    }
  }
  return ll;
}

Eigen::VectorXd quasi_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& mu, Family family, const LinkFunction& lf) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(X.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (w[i] <= 0.0) continue;
    const double v = std::max(family_variance(family, mu[i]), kMeanEps);
    const double r = lf.dmu_deta(eta[i]) / v;
    s += (w[i] * (y[i] - mu[i]) * r) * X.row(i).transpose();
  }
  return s;
}

}  // namespace

FitResult fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights, Family family, Link link) {
  DesignMatrix d;
  d.X = X;
  d.column_names.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) d.column_names[j] = "b" + std::to_string(j);
  return fit_glm(d, y, weights, family, link);
}

FitResult fit_glm(const DesignMatrix& design, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights, Family family, Link link) {
  const Eigen::MatrixXd& X = design.X;
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n || weights.size() != n)
    throw validation_error("fit_glm: length mismatch between design, outcome and weights");
  if (n < p) throw validation_error("fit_glm: fewer rows than parameters");

  int n_pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[i] >= 0.0)) throw validation_error("fit_glm: negative or non-finite weight");
    if (weights[i] > 0.0) ++n_pos;
  }
  if (n_pos < p)
    throw validation_error("fit_glm: need at least as many positively weighted rows as parameters");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (family == Family::binomial && !(y[i] >= 0.0 && y[i] <= 1.0))
      throw validation_error("fit_glm: binomial outcome outside [0,1]");
    if (family == Family::poisson && !(y[i] >= 0.0))
      throw validation_error("fit_glm: negative poisson outcome");
  }

  const LinkFunction lf{link};

  // mustart in the style of the classical IRLS initialisations
  Eigen::VectorXd mu(n), eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m;
    switch (family) {
      case Family::binomial: m = (weights[i] * y[i] + 0.5) / (weights[i] + 1.0); break;
      case Family::poisson: m = y[i] + 0.1; break;
      default: m = y[i];
    }
    mu[i] = clamp_mean(family, m);
    eta[i] = lf.eta(mu[i]);
  }

  auto deviance_of = [&](const Eigen::VectorXd& m) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (weights[i] > 0.0) dev += weights[i] * unit_deviance(family, y[i], m[i]);
    return dev;
  };

  double dev = deviance_of(mu);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  bool have_theta = false;
  bool dev_converged = false;
  int iter = 0;
  std::vector<double> history;

  auto finish = [&](bool converged) {
    FitResult fit;
    fit.column_names = design.column_names;
    fit.coefficients = theta;
    fit.family = family;
    fit.link = link;
    fit.deviance = dev;
    fit.converged = converged;
    fit.n_iterations = iter;
    fit.deviance_history = history;

    double sum_w = 0.0, sum_wr2 = 0.0;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights[i] <= 0.0) continue;
      const double dmu = lf.dmu_deta(eta[i]);
      const double v = std::max(family_variance(family, mu[i]), kMeanEps);
      info.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(),
                                                      weights[i] * dmu * dmu / v);
      sum_w += weights[i];
      const double r = y[i] - mu[i];
      sum_wr2 += weights[i] * r * r;
    }
    info = info.selfadjointView<Eigen::Lower>();
    fit.dispersion = (family == Family::gaussian) ? (sum_wr2 / sum_w) : 1.0;
    if (converged) {
      fit.model_cov = invert_psd(info, "information matrix") * fit.dispersion;
    } else {
      // error path: never throw while assembling the carried last iterate
      try {
        fit.model_cov = invert_psd(info, "information matrix") * fit.dispersion;
      } catch (const numeric_error&) {
        fit.model_cov = Eigen::MatrixXd::Zero(p, p);
      }
    }
    fit.log_likelihood = log_likelihood_at(family, y, mu, weights,
                                           std::max(fit.dispersion, 1e-300));
    fit.score_inf_norm =
        quasi_score(X, y, weights, eta, mu, family, lf).cwiseAbs().maxCoeff();
    return fit;
  };

  while (iter < kMaxIter) {
    ++iter;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights[i] <= 0.0) continue;
      const double dmu = std::max(lf.dmu_deta(eta[i]), kMeanEps);
      const double v = std::max(family_variance(family, mu[i]), kMeanEps);
      const double wi = weights[i] * dmu * dmu / v;
      const double zi = eta[i] + (y[i] - mu[i]) / dmu;
      a.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), wi);
      b += (wi * zi) * X.row(i).transpose();
    }
    a = a.selfadjointView<Eigen::Lower>();

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd dvec = ldlt.vectorD();
    const double dmax = dvec.cwiseAbs().maxCoeff();
    if (!(dmax > 0.0) || dvec.minCoeff() <= dmax * 1e-12) {
      theta = have_theta ? theta : Eigen::VectorXd::Zero(p);
      throw glm_error("singular information matrix in IRLS", finish(false));
    }
    Eigen::VectorXd theta_new = ldlt.solve(b);

    auto evaluate = [&](const Eigen::VectorXd& t, Eigen::VectorXd& eta_out,
                        Eigen::VectorXd& mu_out) {
      eta_out = X * t;
      mu_out.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) mu_out[i] = clamp_mean(family, lf.mu(eta_out[i]));
      return deviance_of(mu_out);
    };

    Eigen::VectorXd eta_new, mu_new;
    double dev_new = evaluate(theta_new, eta_new, mu_new);

    if (have_theta) {
      // step halving keeps the deviance monotone
      int halvings = 0;
      while ((!std::isfinite(dev_new) || dev_new > dev + 1e-13 * (1.0 + std::abs(dev))) &&
             halvings < 30) {
        theta_new = 0.5 * (theta_new + theta);
        dev_new = evaluate(theta_new, eta_new, mu_new);
        ++halvings;
      }
      if (!std::isfinite(dev_new)) {
        throw glm_error("IRLS diverged (non-finite deviance)", finish(false));
      }
    } else if (!std::isfinite(dev_new)) {
      throw glm_error("IRLS diverged on the first step", finish(false));
    }

    const double rel = std::abs(dev - dev_new) / (0.1 + std::abs(dev_new));
    theta = theta_new;
    eta = eta_new;
    mu = mu_new;
    dev = dev_new;
    have_theta = true;
    history.push_back(dev);

    if (rel < kDevTol) {
      dev_converged = true;
      const double s_inf =
          quasi_score(X, y, weights, eta, mu, family, lf).cwiseAbs().maxCoeff();
      if (s_inf < kScoreTol) break;
      // deviance has stalled but the score is not flat yet: keep polishing
    }
  }

  if (!dev_converged) {
    throw glm_error("IRLS did not converge in " + std::to_string(kMaxIter) +
                        " iterations (possible separation)",
                    finish(false));
  }
  if (family == Family::binomial && dev < std::max(1e-8, 1e-10 * static_cast<double>(n))) {
    throw glm_error("perfect separation suspected (deviance collapsed to zero)", finish(false));
  }

  FitResult fit = finish(true);
  fit.sandwich_cov = sandwich_cov(fit, X, y, weights);
  return fit;
}

Eigen::MatrixXd sandwich_cov(const FitResult& fit, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (fit.coefficients.size() != p) throw validation_error("sandwich_cov: column mismatch");
  const LinkFunction lf{fit.link};

  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd eta = X * fit.coefficients;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights[i] <= 0.0) continue;
    const double mu = clamp_mean(fit.family, lf.mu(eta[i]));
    const double dmu = lf.dmu_deta(eta[i]);
    const double d2mu = lf.d2mu_deta2(eta[i]);
    const double v = std::max(family_variance(fit.family, mu), kMeanEps);
    const double vp = family_variance_prime(fit.family, mu);
    const double r = dmu / v;
    const double r_prime = d2mu / v - dmu * dmu * vp / (v * v);
    const double resid = y[i] - mu;
    // observed information of the quasi-score
    bread.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(),
                                                     weights[i] * (dmu * r - resid * r_prime));
    meat.selfadjointView<Eigen::Lower>().rankUpdate(
        X.row(i).transpose(), weights[i] * weights[i] * resid * resid * r * r);
  }
  bread = bread.selfadjointView<Eigen::Lower>();
  meat = meat.selfadjointView<Eigen::Lower>();

  const Eigen::MatrixXd bread_inv = invert_psd(bread, "sandwich bread");
  Eigen::MatrixXd out = bread_inv * meat * bread_inv;
  return 0.5 * (out + out.transpose());
}

double delta_method_var(const std::function<double(const Eigen::VectorXd&)>& transform,
                        const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov) {
  const Eigen::Index p = theta.size();
  if (cov.rows() != p || cov.cols() != p)
    throw validation_error("delta_method_var: covariance size mismatch");
  Eigen::VectorXd grad(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(theta[j]));
    Eigen::VectorXd hi = theta, lo = theta;
    hi[j] += h;
    lo[j] -= h;
    grad[j] = (transform(hi) - transform(lo)) / (2.0 * h);
    if (!std::isfinite(grad[j]))
      throw numeric_error("delta_method_var: non-finite gradient component");
  }
  const double var = grad.dot(cov * grad);
  return std::max(var, 0.0);
}

Eigen::VectorXd predict_mean(const FitResult& fit, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != fit.coefficients.size())
    throw validation_error("predict_mean: column mismatch");
  const LinkFunction lf{fit.link};
  const Eigen::VectorXd eta = X_new * fit.coefficients;
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu[i] = clamp_mean(fit.family, lf.mu(eta[i]));
  return mu;
}

Eigen::VectorXd predict_mean(const FitResult& fit, const DesignMatrix& design) {
  if (design.column_names != fit.column_names)
    throw validation_error("predict_mean: design columns do not match the fit");
  return predict_mean(fit, design.X);
}

}  // namespace paic
