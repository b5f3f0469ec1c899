#include "paic/stats.hpp"

#include <algorithm>
#include <cmath>

#include "paic/errors.hpp"

namespace paic::stats {

namespace {

constexpr double kSqrt1_2 = 0.70710678118654752440;

double horner(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

}  // namespace

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kSqrt1_2); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("norm_quantile: p must lie in (0,1)");
  // Wichura (1988) algorithm AS 241, PPND16.
  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static const double c[8] = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(a, 8, r) / horner(b, 8, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = horner(c, 8, r) / horner(d, 8, r);
  } else {
    r -= 5.0;
    val = horner(e, 8, r) / horner(f, 8, r);
  }
  return (q < 0.0) ? -val : val;
}

namespace {

double gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_cont_fraction(double a, double x) {
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double lower_gamma_regularized(double shape, double x) {
  if (!(shape > 0.0)) throw numeric_error("incomplete gamma: shape must be positive");
  if (x <= 0.0) return 0.0;
  return (x < shape + 1.0) ? gamma_series(shape, x) : 1.0 - gamma_cont_fraction(shape, x);
}

double gamma_cdf(double x, double shape, double rate) {
  if (!(rate > 0.0)) throw numeric_error("gamma_cdf: rate must be positive");
  return lower_gamma_regularized(shape, x * rate);
}

double gamma_quantile(double p, double shape, double rate) {
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("gamma_quantile: p must lie in (0,1)");
  if (!(shape > 0.0 && rate > 0.0)) throw numeric_error("gamma_quantile: invalid parameters");

  // Wilson-Hilferty start, then safeguarded Newton on the standard (rate 1) scale.
  const double z = norm_quantile(p);
  const double t = 1.0 - 1.0 / (9.0 * shape) + z * std::sqrt(1.0 / (9.0 * shape));
  double x = shape * t * t * t;
  if (!(x > 0.0) || !std::isfinite(x)) x = shape * std::exp(z / std::sqrt(shape));
  if (!(x > 0.0) || !std::isfinite(x)) x = 1e-8;

  double lo = 0.0;
  double hi = std::max(x, 1e-8);
  for (int i = 0; i < 400 && lower_gamma_regularized(shape, hi) < p; ++i) hi *= 2.0;
  x = std::clamp(x, 1e-300, hi);

  const double log_norm = std::lgamma(shape);
  for (int it = 0; it < 200; ++it) {
    const double fx = lower_gamma_regularized(shape, x) - p;
    if (fx > 0.0) hi = x; else lo = x;
    const double logpdf = (shape - 1.0) * std::log(x) - x - log_norm;
    double step = fx / std::exp(logpdf);
    double x_new = x - step;
    if (!(x_new > lo && x_new < hi) || !std::isfinite(x_new)) x_new = 0.5 * (lo + hi);
    if (std::abs(x_new - x) <= 1e-14 * (x + 1e-300)) {
      x = x_new;
      break;
    }
    x = x_new;
  }
  return x / rate;
}

namespace {

double beta_cont_fraction(double a, double b, double x) {
  const double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw numeric_error("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cont_fraction(a, b, x) / a;
  return 1.0 - bt * beta_cont_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double df) {
  if (!(df > 0.0)) throw numeric_error("t_cdf: df must be positive");
  if (!std::isfinite(t)) return t > 0.0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return (t > 0.0) ? 1.0 - tail : tail;
}

double t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("t_quantile: p must lie in (0,1)");
  if (!(df > 0.0)) throw numeric_error("t_quantile: df must be positive");
  if (p == 0.5) return 0.0;
  if (df > 1e8) return norm_quantile(p);

  double lo = -1.0, hi = 1.0;
  for (int i = 0; i < 2000 && t_cdf(lo, df) > p; ++i) lo *= 2.0;
  for (int i = 0; i < 2000 && t_cdf(hi, df) < p; ++i) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, df) < p) lo = mid; else hi = mid;
    if (hi - lo < 1e-13 * (1.0 + std::abs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw numeric_error("mean of empty vector");
  return v.mean();
}

double sample_variance(const Eigen::VectorXd& v) {
  const auto n = v.size();
  if (n < 2) throw numeric_error("sample_variance needs at least 2 values");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

double sample_sd(const Eigen::VectorXd& v) { return std::sqrt(sample_variance(v)); }

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2) throw numeric_error("pearson: size mismatch");
  const double mx = x.mean();
  const double my = y.mean();
  const Eigen::ArrayXd cx = x.array() - mx;
  const Eigen::ArrayXd cy = y.array() - my;
  const double sxx = cx.square().sum();
  const double syy = cy.square().sum();
  if (sxx <= 0.0 || syy <= 0.0) throw numeric_error("pearson: constant column");
  return (cx * cy).sum() / std::sqrt(sxx * syy);
}

}  // namespace paic::stats
