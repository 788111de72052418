#include "loadcast/normal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace loadcast::normal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// x * pdf(x) with the infinite limits taken as 0
double xpdf(double x) { return std::isinf(x) ? 0.0 : x * pdf(x); }

}  // namespace

double pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

TruncatedMoments truncated_moments(double mean, double sd, double lo, double hi) {
  if (sd <= 0.0) return {std::clamp(mean, lo, hi), 0.0};
  double a = (lo - mean) / sd;
  double b = (hi - mean) / sd;
  // Reflect upper-tail intervals so the mass is computed from small cdf values.
  const bool flip = a > 0.0;
  if (flip) {
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  const double mass = cdf(b) - cdf(a);
  double z_mean;
  double z_var;
  if (!(mass > 1e-300)) {
    // Interval lies too far in the tail; the mass concentrates at the nearer bound.
    z_mean = std::isinf(b) ? a : b;
    z_var = 0.0;
  } else {
    const double ratio = (pdf(a) - pdf(b)) / mass;
    z_mean = ratio;
    z_var = 1.0 + (xpdf(a) - xpdf(b)) / mass - ratio * ratio;
    z_var = std::max(z_var, 0.0);
  }
  if (flip) z_mean = -z_mean;
  return {mean + sd * z_mean, sd * sd * z_var};
}

double log_interval_probability(double mean, double sd, double lo, double hi) {
  double a = (lo - mean) / sd;
  double b = (hi - mean) / sd;
  if (a > 0.0) {
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  const double mass = cdf(b) - cdf(a);
  if (mass > 0.0) return std::log(mass);
  // Far tail: log cdf(b) ~ log pdf(b) - log(-b)
  return std::log(kInvSqrt2Pi) - 0.5 * b * b - std::log(-b);
}

}  // namespace loadcast::normal
