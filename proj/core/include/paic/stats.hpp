#pragma once

#include <Eigen/Core>

namespace paic::stats {

double norm_pdf(double x);
double norm_cdf(double x);

// Inverse standard normal CDF (Wichura's PPND16); abs error < 1e-15 on (0,1).
double norm_quantile(double p);

// Regularized lower incomplete gamma P(shape, x).
double lower_gamma_regularized(double shape, double x);
double gamma_cdf(double x, double shape, double rate);
double gamma_quantile(double p, double shape, double rate);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
double t_cdf(double t, double df);
double t_quantile(double p, double df);

double mean(const Eigen::VectorXd& v);
double sample_variance(const Eigen::VectorXd& v);
double sample_sd(const Eigen::VectorXd& v);
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace paic::stats
