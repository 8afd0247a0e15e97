#pragma once

#include <span>

namespace medtest::stats {

double normal_cdf(double x);

/// Upper tail P(Z > x) of the standard normal.
double normal_sf(double x);

/// Upper tail of the chi-squared distribution with `dof` degrees of freedom.
double chi_squared_sf(double x, double dof);

/// One-sample Kolmogorov-Smirnov statistic D_n against Uniform(0, 1).
double ks_uniform_statistic(std::span<const double> sample);

/// Asymptotic Kolmogorov survival function P(K > x), with the usual
/// finite-sample correction applied by the caller via
/// x = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) * D_n.
double kolmogorov_sf(double x);

/// p-value of the uniformity KS test for `sample`.
double ks_uniform_pvalue(std::span<const double> sample);

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> values);

}  // namespace medtest::stats
