#pragma once

namespace loadcast::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x);
double cdf(double x);
/// Upper tail 1 - cdf(x), accurate for large x.
double sf(double x);
/// Inverse of cdf on (0, 1); +-inf at the endpoints.
double quantile(double p);

/// Moments of N(mean, sd^2) truncated to (lo, hi); lo/hi may be infinite.
struct TruncatedMoments {
  double mean;
  double variance;
};

TruncatedMoments truncated_moments(double mean, double sd, double lo, double hi);

/// log P(lo < X < hi) for X ~ N(mean, sd^2).
double log_interval_probability(double mean, double sd, double lo, double hi);

}  // namespace loadcast::normal
