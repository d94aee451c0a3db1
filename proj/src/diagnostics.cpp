#include "blsacd/diagnostics.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <limits>
#include <numbers>
#include <tuple>
#include <ostream>

#include "blsacd/errors.hpp"
#include "blsacd/format.hpp"
#include "blsacd/radial.hpp"
#include "blsacd/stats.hpp"

namespace blsacd {

ResidualSeries residuals(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& series,
                         const LikelihoodOptions& opts) {
    const MedianPaths paths = recurse_medians(spec, theta_hat, series, opts);
    ResidualSeries out;
    out.generator = spec.generator;
    out.re.resize(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        out.re[t] = quad_form(theta_hat, series.y1[t], series.y2[t], paths.eta1[t], paths.eta2[t]);
    }
    return out;
}

double reference_cdf(const GeneratorSpec& gen, double x) {
    if (!(x >= 0.0)) throw DomainError("reference_cdf needs x >= 0");
    return radial_cdf(gen, x);
}

double reference_cdf_double_integral(const GeneratorSpec& gen, double x) {
    validate(gen);
    if (!(x >= 0.0)) throw DomainError("reference_cdf needs x >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    // z1 = sqrt(x) sin(phi), z2 = sqrt(x) cos(phi) s over phi in [0, pi/2], s in [0, 1].
    using boost::math::quadrature::gauss_kronrod;
    const auto inner = [&](double phi) {
        const double c = std::cos(phi);
        const double s1 = std::sin(phi);
        const auto f = [&](double s) {
            const double u = x * (s1 * s1 + c * c * s * s);
            return u > 0.0 ? x * c * c * eval_g(gen, u) : 0.0;
        };
        return gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 15, 1e-12);
    };
    const double v = gauss_kronrod<double, 31>::integrate(inner, 0.0, std::numbers::pi / 2, 15, 1e-12);
    return 4.0 * v / z_const(gen);
}

std::vector<QqPoint> qq_points(const ResidualSeries& res) {
    const std::size_t n = res.re.size();
    if (n < 2) throw DomainError("QQ plot needs at least two residuals");
    std::vector<double> sorted = res.re;
    std::sort(sorted.begin(), sorted.end());
    const RadialLaw& law = radial_law(res.generator);
    std::vector<QqPoint> pts(n);
    for (std::size_t k = 0; k < n; ++k) {
        pts[k].theoretical = law.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
        pts[k].empirical = sorted[k];
    }
    return pts;
}

double qq_upper_tail_share(const std::vector<QqPoint>& points) {
    if (points.empty()) throw DomainError("no QQ points");
    const std::size_t n = points.size();
    const std::size_t m = std::max<std::size_t>(1, n / 10);
    std::size_t above = 0;
    for (std::size_t k = n - m; k < n; ++k) {
        if (points[k].empirical > points[k].theoretical) ++above;
    }
    return static_cast<double>(above) / static_cast<double>(m);
}

bool qq_upper_tail_deviation(const std::vector<QqPoint>& points) {
    return qq_upper_tail_share(points) >= 0.7;
}

KsResult ks_test(const ResidualSeries& res) {
    const RadialLaw& law = radial_law(res.generator);
    KsResult out;
    out.statistic = stats::ks_statistic(res.re, [&](double x) { return law.cdf(x); });
    out.p_value = stats::ks_pvalue(out.statistic, res.re.size());
    return out;
}

Correlogram acf_pacf(const std::vector<double>& x, int max_lag) {
    const std::size_t n = x.size();
    if (max_lag < 1 || 4 * static_cast<std::size_t>(max_lag) >= n) {
        throw DomainError("max_lag must satisfy 1 <= max_lag < T/4");
    }
    const double m = stats::mean(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    if (!(c0 > 0.0)) throw DomainError("residuals have zero variance");

    Correlogram out;
    out.band = 1.96 / std::sqrt(static_cast<double>(n));
    const auto L = static_cast<std::size_t>(max_lag);
    out.acf.resize(L);
    for (std::size_t k = 1; k <= L; ++k) {
        double ck = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) ck += (x[t] - m) * (x[t + k] - m);
        out.acf[k - 1] = ck / c0;
    }
    // Durbin-Levinson.
    out.pacf.resize(L);
    std::vector<double> phi(L + 1, 0.0), prev(L + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= L; ++k) {
        double num = out.acf[k - 1];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * out.acf[k - j - 1];
        const double a = num / v;
        phi[k] = a;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - a * prev[k - j];
        v *= 1.0 - a * a;
        out.pacf[k - 1] = a;
        prev = phi;
    }
    return out;
}

double marginal_density(const GeneratorSpec& gen, double w) {
    validate(gen);
    const double w2 = w * w;
    boost::math::quadrature::exp_sinh<double> es;
    const auto f = [&](double v) {
        const double u = w2 + v * v;
        return u > 0.0 ? eval_g(gen, u) : 0.0;
    };
    return 2.0 * es.integrate(f, 0.0, std::numeric_limits<double>::infinity()) / z_const(gen);
}

namespace {

// P(W > m) for m >= 0. With W = R cos(Theta) and Theta uniform, the upper
// tail is (1/Z) * integral over x > m^2 of arccos(m / sqrt(x)) g(x).
double marginal_survival(const GeneratorSpec& gen, double m) {
    if (m == 0.0) return 0.5;
    const double m2 = m * m;
    boost::math::quadrature::exp_sinh<double> es;
    const auto f = [&](double s) {
        const double x = m2 + s;
        return std::acos(std::min(1.0, m / std::sqrt(x))) * eval_g(gen, x);
    };
    const double v = es.integrate(f, 0.0, std::numeric_limits<double>::infinity());
    return std::clamp(v / z_const(gen), 0.0, 0.5);
}

}  // namespace

double marginal_cdf(const GeneratorSpec& gen, double w) {
    validate(gen);
    if (std::isnan(w)) throw DomainError("marginal_cdf of NaN");
    if (std::isinf(w)) return w > 0 ? 1.0 : 0.0;
    return w >= 0.0 ? 1.0 - marginal_survival(gen, w) : marginal_survival(gen, -w);
}

double marginal_quantile(const GeneratorSpec& gen, double p) {
    validate(gen);
    if (!(p > 0.0 && p < 1.0)) throw DomainError("marginal quantile level must lie in (0, 1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -marginal_quantile(gen, 1.0 - p);

    static std::mutex mu;
    static std::map<std::tuple<int, double, double>, double> cache;
    const auto key = std::make_tuple(static_cast<int>(gen.family), gen.nu(), p);
    {
        std::lock_guard<std::mutex> lock(mu);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    const double target = 1.0 - p;
    const auto f = [&](double m) { return marginal_survival(gen, m) - target; };
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw NumericError("marginal quantile bracket failed");
    }
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    const double m = 0.5 * (r.first + r.second);
    if (!std::isfinite(m)) throw NumericError("marginal quantile did not converge");

    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, m);
    return m;
}

PredictionBand predict_intervals(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& in_sample,
                                 const BiSeries& out_sample, double nominal, const LikelihoodOptions& opts) {
    if (!(nominal > 0.0 && nominal < 1.0)) throw DomainError("nominal level must lie in (0, 1)");
    in_sample.validate();
    out_sample.validate();
    BiSeries all = in_sample;
    all.y1.insert(all.y1.end(), out_sample.y1.begin(), out_sample.y1.end());
    all.y2.insert(all.y2.end(), out_sample.y2.begin(), out_sample.y2.end());
    all.timestamps.clear();
    const MedianPaths paths = recurse_medians(spec, theta_hat, all, opts);

    const double m_hi = marginal_quantile(spec.generator, 0.5 * (1.0 + nominal));
    const double m_lo = -m_hi;
    PredictionBand band;
    band.nominal = nominal;
    const std::size_t off = in_sample.size();
    const std::size_t n = out_sample.size();
    std::size_t hit[2] = {0, 0};
    for (std::size_t t = 0; t < n; ++t) {
        for (int i = 0; i < 2; ++i) {
            const double eta = paths.eta(i)[off + t];
            const double y = i == 0 ? out_sample.y1[t] : out_sample.y2[t];
            const double lo = eta * std::exp(theta_hat.sigma(i) * m_lo);
            const double hi = eta * std::exp(theta_hat.sigma(i) * m_hi);
            if (lo <= y && y <= hi) ++hit[i];
            (i == 0 ? band.y1 : band.y2).push_back(y);
            (i == 0 ? band.lower1 : band.lower2).push_back(lo);
            (i == 0 ? band.upper1 : band.upper2).push_back(hi);
        }
    }
    band.coverage1 = static_cast<double>(hit[0]) / static_cast<double>(n);
    band.coverage2 = static_cast<double>(hit[1]) / static_cast<double>(n);
    return band;
}

std::size_t split_point(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("split fraction must lie in (0, 1)");
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    if (k < 1 || k >= n) throw DomainError("split leaves an empty sample");
    return k;
}

void write_qq_csv(const std::vector<QqPoint>& points, std::ostream& os) {
    os << "theoretical,empirical\n";
    for (const auto& p : points) os << fmt(p.theoretical) << ',' << fmt(p.empirical) << '\n';
}

void write_correlogram_csv(const Correlogram& c, std::ostream& os) {
    os << "lag,acf,pacf,band\n";
    for (std::size_t k = 0; k < c.acf.size(); ++k) {
        os << k + 1 << ',' << fmt(c.acf[k]) << ',' << fmt(c.pacf[k]) << ',' << fmt(c.band) << '\n';
    }
}

void write_band_csv(const PredictionBand& band, std::size_t first_t, std::ostream& os) {
    os << "t,y1,lo1,hi1,y2,lo2,hi2\n";
    for (std::size_t k = 0; k < band.y1.size(); ++k) {
        os << first_t + k << ',' << fmt(band.y1[k]) << ',' << fmt(band.lower1[k]) << ',' << fmt(band.upper1[k])
           << ',' << fmt(band.y2[k]) << ',' << fmt(band.lower2[k]) << ',' << fmt(band.upper2[k]) << '\n';
    }
}

}  // namespace blsacd
