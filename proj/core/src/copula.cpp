#include "paic/copula.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "paic/errors.hpp"
#include "paic/stats.hpp"

namespace paic {

CorrelationMatrix CorrelationMatrix::identity(const std::vector<std::string>& names) {
  CorrelationMatrix c;
  c.names = names;
  c.rho = Eigen::MatrixXd::Identity(static_cast<int>(names.size()),
                                    static_cast<int>(names.size()));
  return c;
}

void CorrelationMatrix::validate() const {
  const auto k = rho.rows();
  if (rho.cols() != k || static_cast<Eigen::Index>(names.size()) != k)
    throw validation_error("correlation matrix: shape/name mismatch");
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(rho(i, i) - 1.0) > 1e-8)
      throw validation_error("correlation matrix: diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(rho(i, j) - rho(j, i)) > 1e-8)
        throw validation_error("correlation matrix: not symmetric");
      if (std::abs(rho(i, j)) > 1.0 + 1e-12)
        throw validation_error("correlation matrix: entry outside [-1,1]");
    }
  }
}

CorrelationMatrix correlation_from_ipd(const IpdTable& ipd,
                                       const std::vector<std::string>& covariates) {
  if (ipd.n_rows() < 2) throw validation_error("correlation_from_ipd: needs at least 2 rows");
  const int k = static_cast<int>(covariates.size());
  if (k == 0) throw validation_error("correlation_from_ipd: empty covariate list");

  CorrelationMatrix c;
  c.names = covariates;
  c.rho = Eigen::MatrixXd::Identity(k, k);
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(k);
  for (const auto& name : covariates) {
    Eigen::VectorXd col = ipd.covariate(name);
    const double m = col.mean();
    if ((col.array() - m).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(m)))
      throw validation_error("correlation_from_ipd: covariate '" + name + "' is constant");
    cols.push_back(std::move(col));
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j)
      c.rho(i, j) = c.rho(j, i) = stats::pearson(cols[i], cols[j]);
  return c;
}

MarginalDist parse_marginal_dist(const std::string& token) {
  if (token == "norm" || token == "normal") return MarginalDist::norm;
  if (token == "gamma") return MarginalDist::gamma;
  if (token == "binom" || token == "bernoulli") return MarginalDist::bernoulli;
  if (token == "lognorm" || token == "lognormal") return MarginalDist::lognorm;
  throw validation_error("unknown marginal distribution '" + token + "'");
}

std::string to_string(MarginalDist d) {
  switch (d) {
    case MarginalDist::norm: return "norm";
    case MarginalDist::gamma: return "gamma";
    case MarginalDist::bernoulli: return "binom";
    case MarginalDist::lognorm: return "lognorm";
  }
  return "?";
}

double Marginal::quantile(double u) const {
  switch (dist) {
    case MarginalDist::norm:
      return p1 + p2 * stats::norm_quantile(u);
    case MarginalDist::gamma:
      return stats::gamma_quantile(u, p1, p2);
    case MarginalDist::bernoulli:
      return u > 1.0 - p1 ? 1.0 : 0.0;
    case MarginalDist::lognorm:
      return std::exp(p1 + p2 * stats::norm_quantile(u));
  }
  return 0.0;
}

double Marginal::cdf(double x) const {
  switch (dist) {
    case MarginalDist::norm:
      return stats::norm_cdf((x - p1) / p2);
    case MarginalDist::gamma:
      return x <= 0.0 ? 0.0 : stats::gamma_cdf(x, p1, p2);
    case MarginalDist::bernoulli:
      if (x < 0.0) return 0.0;
      return x < 1.0 ? 1.0 - p1 : 1.0;
    case MarginalDist::lognorm:
      return x <= 0.0 ? 0.0 : stats::norm_cdf((std::log(x) - p1) / p2);
  }
  return 0.0;
}

double Marginal::mean() const {
  switch (dist) {
    case MarginalDist::norm: return p1;
    case MarginalDist::gamma: return p1 / p2;
    case MarginalDist::bernoulli: return p1;
    case MarginalDist::lognorm: return std::exp(p1 + 0.5 * p2 * p2);
  }
  return 0.0;
}

double Marginal::sd() const {
  switch (dist) {
    case MarginalDist::norm: return p2;
    case MarginalDist::gamma: return std::sqrt(p1) / p2;
    case MarginalDist::bernoulli: return std::sqrt(p1 * (1.0 - p1));
    case MarginalDist::lognorm:
      return std::exp(p1 + 0.5 * p2 * p2) * std::sqrt(std::expm1(p2 * p2));
  }
  return 0.0;
}

void Marginal::validate(const std::string& name) const {
  switch (dist) {
    case MarginalDist::norm:
      if (!(p2 > 0.0)) throw validation_error("marginal '" + name + "': sd must be positive");
      break;
    case MarginalDist::gamma:
      if (!(p1 > 0.0 && p2 > 0.0))
        throw validation_error("marginal '" + name + "': gamma shape/rate must be positive");
      break;
    case MarginalDist::bernoulli:
      if (!(p1 >= 0.0 && p1 <= 1.0))
        throw validation_error("marginal '" + name + "': probability outside [0,1]");
      break;
    case MarginalDist::lognorm:
      if (!(p2 > 0.0))
        throw validation_error("marginal '" + name + "': sdlog must be positive");
      break;
  }
}

namespace {

double override_param(const std::map<std::string, double>& params, const std::string& name,
                      std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    const auto it = params.find(k);
    if (it != params.end()) return it->second;
  }
  std::string wanted;
  for (const char* k : keys) wanted += wanted.empty() ? k : std::string("/") + k;
  throw validation_error("marginal '" + name + "': override is missing parameter " + wanted);
}

Marginal from_moments(MarginalDist dist, const std::string& name, double m, double s) {
  Marginal mg;
  mg.dist = dist;
  switch (dist) {
    case MarginalDist::norm:
      mg.p1 = m;
      mg.p2 = s;
      break;
    case MarginalDist::gamma:
      if (!(s > 0.0) || !(m > 0.0))
        throw validation_error("marginal '" + name +
                               "': gamma method of moments needs positive mean and sd");
      mg.p1 = (m / s) * (m / s);
      mg.p2 = m / (s * s);
      break;
    case MarginalDist::bernoulli:
      mg.p1 = m;
      break;
    case MarginalDist::lognorm: {
      if (!(s > 0.0) || !(m > 0.0))
        throw validation_error("marginal '" + name +
                               "': lognormal method of moments needs positive mean and sd");
      const double s2 = std::log1p((s / m) * (s / m));
      mg.p1 = std::log(m) - 0.5 * s2;
      mg.p2 = std::sqrt(s2);
      break;
    }
  }
  mg.validate(name);
  return mg;
}

}  // namespace

MarginalSpec resolve_marginals(
    const AldTable& ald, const std::vector<std::string>& covariates,
    const std::map<std::string, std::string>& distn_overrides,
    const std::map<std::string, std::map<std::string, double>>& param_overrides) {
  MarginalSpec spec;
  spec.names = covariates;
  for (const auto& name : covariates) {
    MarginalDist dist = MarginalDist::norm;
    if (const auto it = distn_overrides.find(name); it != distn_overrides.end())
      dist = parse_marginal_dist(it->second);

    Marginal mg;
    if (const auto it = param_overrides.find(name); it != param_overrides.end()) {
      // manual parameters take precedence over the ALD summaries
      mg.dist = dist;
      switch (dist) {
        case MarginalDist::norm:
          mg.p1 = override_param(it->second, name, {"mean"});
          mg.p2 = override_param(it->second, name, {"sd"});
          break;
        case MarginalDist::gamma:
          mg.p1 = override_param(it->second, name, {"shape"});
          mg.p2 = override_param(it->second, name, {"rate"});
          break;
        case MarginalDist::bernoulli:
          mg.p1 = override_param(it->second, name, {"p", "prob"});
          break;
        case MarginalDist::lognorm:
          mg.p1 = override_param(it->second, name, {"meanlog"});
          mg.p2 = override_param(it->second, name, {"sdlog"});
          break;
      }
      mg.validate(name);
    } else {
      const double m = population_statistic(ald, name, "mean");
      double s = 0.0;
      if (dist != MarginalDist::bernoulli) s = population_statistic(ald, name, "sd");
      mg = from_moments(dist, name, m, s);
    }
    spec.marginals.push_back(mg);
  }
  return spec;
}

namespace {

Eigen::MatrixXd cholesky_with_repair(const Eigen::MatrixXd& rho) {
  Eigen::LLT<Eigen::MatrixXd> llt(rho);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  // clip eigenvalues, rescale to unit diagonal, retry
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rho);
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(1e-10);
  Eigen::MatrixXd repaired =
      eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd d = repaired.diagonal().cwiseSqrt().cwiseInverse();
  repaired = d.asDiagonal() * repaired * d.asDiagonal();
  repaired = 0.5 * (repaired + repaired.transpose());

  Eigen::LLT<Eigen::MatrixXd> llt2(repaired +
                                   1e-12 * Eigen::MatrixXd::Identity(rho.rows(), rho.cols()));
  if (llt2.info() != Eigen::Success)
    throw numeric_error("correlation matrix is not positive semi-definite after repair");
  return llt2.matrixL();
}

}  // namespace

SyntheticCohort simulate_cohort(const CorrelationMatrix& rho, const MarginalSpec& marginals,
                                int n, Rng& rng) {
  rho.validate();
  const int k = static_cast<int>(rho.names.size());
  if (static_cast<int>(marginals.names.size()) != k || rho.names != marginals.names)
    throw validation_error("simulate_cohort: correlation and marginal names differ");
  if (n < 1) throw validation_error("simulate_cohort: cohort size must be at least 1");
  for (int j = 0; j < k; ++j) marginals.marginals[j].validate(marginals.names[j]);

  const Eigen::MatrixXd chol = cholesky_with_repair(rho.rho);

  SyntheticCohort cohort;
  cohort.names = rho.names;
  cohort.covariates.resize(n, k);
  Eigen::VectorXd z(k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) z[j] = rng.normal();
    const Eigen::VectorXd latent = chol * z;
    for (int j = 0; j < k; ++j) {
      const double u = stats::norm_cdf(latent[j]);
      cohort.covariates(i, j) = marginals.marginals[j].quantile(
          std::clamp(u, 1e-16, 1.0 - 1e-16));
    }
  }
  return cohort;
}

}  // namespace paic
