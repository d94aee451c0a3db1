#pragma once

#include <iosfwd>
#include <vector>

#include "blsacd/generators.hpp"
#include "blsacd/model.hpp"

namespace blsacd {

/// Re(y1_t, y2_t): the quadratic form at the fitted medians.
struct ResidualSeries {
    std::vector<double> re;
    GeneratorSpec generator;
};

ResidualSeries residuals(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& series,
                         const LikelihoodOptions& opts = {});

/// Reference law of Re: (pi / Z) times the integral of g over [0, x].
double reference_cdf(const GeneratorSpec& gen, double x);
/// The same probability from the double integral of the joint density over
/// the disc quarter z1^2 + z2^2 <= x; slower, kept for cross-checking.
double reference_cdf_double_integral(const GeneratorSpec& gen, double x);

struct QqPoint {
    double theoretical = 0.0;
    double empirical = 0.0;
};

/// Order statistics against reference quantiles at (k - 0.5) / T.
std::vector<QqPoint> qq_points(const ResidualSeries& res);

/// Share of the top-decile QQ points lying above the diagonal.
double qq_upper_tail_share(const std::vector<QqPoint>& points);
/// True when at least 7 in 10 of the top-decile points lie above the diagonal.
bool qq_upper_tail_deviation(const std::vector<QqPoint>& points);

/// KS distance of the residuals from the reference law and its asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};
KsResult ks_test(const ResidualSeries& res);

struct Correlogram {
    std::vector<double> acf;   // lags 1..max_lag
    std::vector<double> pacf;  // lags 1..max_lag
    double band = 0.0;         // 1.96 / sqrt(T)
};

/// Sample ACF and Durbin-Levinson PACF; needs 1 <= max_lag < T / 4 and
/// nonzero variance (DomainError otherwise).
Correlogram acf_pacf(const std::vector<double>& x, int max_lag);

/// Density of one standardized margin, (2 / Z) times the integral of
/// g(w^2 + v^2) over v > 0.
double marginal_density(const GeneratorSpec& gen, double w);
double marginal_cdf(const GeneratorSpec& gen, double w);
/// p-quantile of the standardized margin; cached per (generator, p).
double marginal_quantile(const GeneratorSpec& gen, double p);

/// One-step-ahead marginal bands on the observation scale.
struct PredictionBand {
    double nominal = 0.0;
    std::vector<double> y1, lower1, upper1;
    std::vector<double> y2, lower2, upper2;
    double coverage1 = 0.0;  // share of lower <= y <= upper
    double coverage2 = 0.0;
};

/// Rolls the median recursion through the in-sample history and then the
/// observed out-of-sample values, giving bands
/// [eta exp(sigma m_{(1-nominal)/2}), eta exp(sigma m_{(1+nominal)/2})].
PredictionBand predict_intervals(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& in_sample,
                                 const BiSeries& out_sample, double nominal, const LikelihoodOptions& opts = {});

/// In-sample length for a fractional split, e.g. 2/3 of 1708 is 1139.
std::size_t split_point(std::size_t n, double fraction);

// CSV writers.
void write_qq_csv(const std::vector<QqPoint>& points, std::ostream& os);
void write_correlogram_csv(const Correlogram& c, std::ostream& os);
void write_band_csv(const PredictionBand& band, std::size_t first_t, std::ostream& os);

}  // namespace blsacd
