#include "medtest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace medtest::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double chi_squared_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    if (!std::isfinite(x)) return 0.0;
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double ks_uniform_statistic(std::span<const double> sample) {
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double u = std::clamp(sorted[i], 0.0, 1.0);
        d = std::max(d, static_cast<double>(i + 1) / n - u);
        d = std::max(d, u - static_cast<double>(i) / n);
    }
    return d;
}

double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    // Alternating series converges quickly once x is away from zero; below
    // ~0.2 the survival probability is 1 to double precision.
    if (x < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double ks_uniform_pvalue(std::span<const double> sample) {
    if (sample.empty()) return 1.0;
    const double root_n = std::sqrt(static_cast<double>(sample.size()));
    const double d = ks_uniform_statistic(sample);
    return kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d);
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace medtest::stats
