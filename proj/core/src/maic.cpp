#include "paic/maic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "paic/errors.hpp"

namespace paic {

namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxIter = 200;
constexpr double kDivergenceNorm = 1e3;

std::string col_name(const std::vector<std::string>& names, int j) {
  if (j < static_cast<int>(names.size())) return "'" + names[j] + "'";
  return "column " + std::to_string(j + 1);
}

}  // namespace

double effective_sample_size(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw validation_error("effective_sample_size: empty weights");
  if ((w.array() < 0.0).any()) throw validation_error("effective_sample_size: negative weight");
  const double s = w.sum();
  const double s2 = w.squaredNorm();
  if (s2 <= 0.0) throw validation_error("effective_sample_size: all weights zero");
  return s * s / s2;
}

std::vector<std::string> matched_covariate_set(const ModelSpec& spec) {
  const auto out = spec.covariates();
  if (out.empty()) throw validation_error("nothing to match: spec has no covariates");
  return out;
}

WeightSolution estimate_weights(const Eigen::MatrixXd& X, const Eigen::VectorXd& target_means,
                                const std::vector<std::string>& names) {
  const int n = static_cast<int>(X.rows());
  const int q = static_cast<int>(X.cols());
  if (q == 0 || target_means.size() != q)
    throw validation_error("estimate_weights: target length must equal covariate count");
  if (n < 1) throw validation_error("estimate_weights: empty covariate matrix");
  if (!target_means.allFinite() || !X.allFinite())
    throw validation_error("estimate_weights: non-finite input");

  // componentwise hull screen; a matching solution needs the target strictly
  // inside the observed range (constant columns must hit it exactly)
  std::vector<int> active;
  for (int j = 0; j < q; ++j) {
    const double lo = X.col(j).minCoeff();
    const double hi = X.col(j).maxCoeff();
    const double span = hi - lo;
    const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
    if (span <= scale * 1e-12) {
      if (std::abs(target_means[j] - lo) > scale * 1e-9)
        throw numeric_error("no covariate overlap: " + col_name(names, j) +
                            " is constant and does not equal its target mean");
      continue;  // already matched, no tilting needed
    }
    if (!(target_means[j] > lo && target_means[j] < hi))
      throw numeric_error("no covariate overlap: target mean for " + col_name(names, j) +
                          " lies outside the observed range");
    active.push_back(j);
  }

  WeightSolution sol;
  sol.beta = Eigen::VectorXd::Zero(q);

  const int qa = static_cast<int>(active.size());
  Eigen::VectorXd beta_std = Eigen::VectorXd::Zero(qa);
  Eigen::MatrixXd Z(n, qa);  // standardised, centred at the target
  Eigen::VectorXd sd(qa);
  for (int k = 0; k < qa; ++k) {
    const int j = active[k];
    const Eigen::VectorXd col = X.col(j);
    const double m = col.mean();
    double s = std::sqrt((col.array() - m).square().sum() / std::max(n - 1, 1));
    if (!(s > 0.0)) s = 1.0;
    sd[k] = s;
    Z.col(k) = (col.array() - target_means[j]) / s;
  }

  auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd& w_out) {
    const Eigen::VectorXd expo = Z * b;
    if (expo.maxCoeff() > 500.0) {
      w_out.setZero(n);
      return std::numeric_limits<double>::infinity();
    }
    w_out = expo.array().exp();
    return w_out.sum();
  };

  Eigen::VectorXd w(n);
  double f = objective(beta_std, w);
  int iter = 0;
  bool converged = qa == 0;

  while (!converged && iter < kMaxIter) {
    ++iter;
    const Eigen::VectorXd grad = Z.transpose() * w;
    if (grad.cwiseAbs().maxCoeff() < kGradTol) {
      converged = true;
      break;
    }
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(qa, qa);
    for (int i = 0; i < n; ++i)
      hess.selfadjointView<Eigen::Lower>().rankUpdate(Z.row(i).transpose(), w[i]);
    hess = hess.selfadjointView<Eigen::Lower>();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd dir = -ldlt.solve(grad);
    if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = -grad;  // fall back to steepest descent

    if (grad.cwiseAbs().maxCoeff() < 1e-4 * (1.0 + f)) {
      // inside the quadratic basin Armijo decreases drown in rounding noise;
      // take plain damped Newton steps to polish the gradient down
      Eigen::VectorXd w_new(n);
      const double f_new = objective(beta_std + dir, w_new);
      if (std::isfinite(f_new)) {
        beta_std += dir;
        w = w_new;
        f = f_new;
        continue;
      }
    }

    // Armijo backtracking, halving factor, with a rounding-noise allowance
    const double slope = grad.dot(dir);
    double step = 1.0;
    Eigen::VectorXd w_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      f_new = objective(beta_std + step * dir, w_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope + 8e-16 * f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw numeric_error("estimate_weights: line search failed to make progress");

    beta_std += step * dir;
    w = w_new;
    f = f_new;

    if (beta_std.norm() > kDivergenceNorm)
      throw numeric_error(
          "no covariate overlap: tilting coefficients diverged (objective unbounded below)");
  }

  if (!converged && (Z.transpose() * w).cwiseAbs().maxCoeff() < kGradTol) converged = true;
  if (!converged)
    throw numeric_error("estimate_weights: no convergence in " + std::to_string(kMaxIter) +
                        " iterations");

  for (int k = 0; k < qa; ++k) sol.beta[active[k]] = beta_std[k] / sd[k];

  // weights on the original scale; identical to exp(Z beta_std) up to rounding
  Eigen::VectorXd expo = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < q; ++j)
    expo += sol.beta[j] * (X.col(j).array() - target_means[j]).matrix();
  sol.weights = expo.array().exp();

  sol.converged = true;
  sol.n_iterations = iter;
  sol.objective_value = sol.weights.sum();
  sol.ess = effective_sample_size(sol.weights);

  double max_err = 0.0;
  const double total = sol.weights.sum();
  for (int j = 0; j < q; ++j) {
    const double wm = sol.weights.dot(X.col(j)) / total;
    max_err = std::max(max_err, std::abs(wm - target_means[j]));
  }
  sol.max_moment_error = max_err;
  return sol;
}

FitResult maic_two_group_fit(const IpdTable& ipd, const ModelSpec& spec,
                             const Eigen::VectorXd& weights, const std::string& comparator) {
  if (weights.size() != ipd.n_rows())
    throw validation_error("maic fit: weight length mismatch");
  const Eigen::VectorXd ind = ipd.treatment_indicator(comparator);
  const double total = weights.sum();
  const double w_comp = weights.dot(ind);
  if (!(w_comp > 1e-10 * total) || !(total - w_comp > 1e-10 * total))
    throw numeric_error("maic fit: one arm carries essentially no weight");

  DesignMatrix d;
  d.column_names = {"(Intercept)", spec.treatment};
  d.treatment_column = 1;
  d.X.resize(ipd.n_rows(), 2);
  d.X.col(0).setOnes();
  d.X.col(1) = ind;
  return fit_glm(d, ipd.outcomes(), weights, spec.family, spec.link);
}

}  // namespace paic
