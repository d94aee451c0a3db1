#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace blsacd::stats {

double mean(const std::vector<double>& x);
/// Sample standard deviation (n - 1 denominator); 0 for n < 2.
double sample_sd(const std::vector<double>& x);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // 1/n
    double skewness = 0.0;  // m3 / m2^{3/2}
    double kurtosis = 0.0;  // m4 / m2^2, not excess
};
/// Central moments with 1/n normalization. Skewness and kurtosis are 0 when
/// the variance is 0.
Moments moments(const std::vector<double>& x);

/// Median-unbiased sample quantile (Hyndman-Fan type 8).
double quantile_type8(std::vector<double> x, double p);

/// Two-sided Kolmogorov-Smirnov distance of the sample against a CDF.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Asymptotic p-value with Stephens' small-sample correction.
double ks_pvalue(double d, std::size_t n);

}  // namespace blsacd::stats
