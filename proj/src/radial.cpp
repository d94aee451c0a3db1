#include "blsacd/radial.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include "blsacd/errors.hpp"

namespace blsacd {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kGridLo = 1e-12;
constexpr double kGridHi = 1e12;
constexpr int kNodesPerOctave = 32;

}  // namespace

RadialLaw::RadialLaw(GeneratorSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    scale_ = std::numbers::pi / z_const(spec_);

    const double ratio = std::pow(2.0, 1.0 / kNodesPerOctave);
    for (double x = kGridLo; x <= kGridHi * 1.000001; x *= ratio) nodes_.push_back(x);
    const std::size_t n = nodes_.size();

    std::vector<double> panel(n, 0.0);  // panel[k] = mass on [x_{k-1}, x_k]
    panel[0] = integrate(0.0, nodes_[0]);
    for (std::size_t k = 1; k < n; ++k) panel[k] = integrate(nodes_[k - 1], nodes_[k]);

    lower_.resize(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += panel[k];
        lower_[k] = acc;
    }
    upper_.resize(n);
    acc = upper_tail(nodes_[n - 1]);
    upper_[n - 1] = acc;
    for (std::size_t k = n - 1; k-- > 0;) {
        acc += panel[k + 1];
        upper_[k] = acc;
    }
    dens_.resize(n);
    for (std::size_t k = 0; k < n; ++k) dens_[k] = density(nodes_[k]);

    mass_defect_ = std::abs(lower_[n - 1] + upper_[n - 1] - 1.0);
}

double RadialLaw::density(double x) const {
    if (x <= 0.0) return 0.0;
    return scale_ * eval_g(spec_, x);
}

double RadialLaw::integrate(double a, double b) const {
    if (!(b > a)) return 0.0;
    if (a == 0.0) {
        // Integrable singularities at the origin: integrate over v = log u,
        // unit panels down to u = b e^{-80}.
        const auto f = [this](double v) { return density(std::exp(v)) * std::exp(v); };
        const double top = std::log(b);
        double acc = 0.0;
        for (int k = 80; k-- > 0;) acc += bisect(f, top - k - 1, top - k, 0);
        return acc;
    }
    return bisect([this](double u) { return density(u); }, a, b, 0);
}

// Bisecting Gauss-Kronrod: accept when the panel rule and the sum over its
// two halves agree. (Boost's own error estimate has an absolute floor near
// 2 eps, useless for the tiny probabilities of the outer panels.)
template <class F>
double RadialLaw::bisect(const F& f, double a, double b, int depth) {
    const double m = 0.5 * (a + b);
    const double whole = gauss_kronrod<double, 21>::integrate(f, a, b, 0, 0.0);
    const double left = gauss_kronrod<double, 21>::integrate(f, a, m, 0, 0.0);
    const double right = gauss_kronrod<double, 21>::integrate(f, m, b, 0, 0.0);
    const double halves = left + right;
    if (std::abs(whole - halves) <= 1e-14 * std::abs(halves) || std::abs(halves) < 1e-300 || depth >= 12) {
        return halves;
    }
    return bisect(f, a, m, depth + 1) + bisect(f, m, b, depth + 1);
}

double RadialLaw::upper_tail(double x) const {
    // Over v = log u power-law tails decay exponentially; unit panels up to
    // the overflow point of exp(v).
    const auto f = [this](double v) { return density(std::exp(v)) * std::exp(v); };
    double acc = 0.0;
    for (double v = std::log(x); v < 709.0; v += 1.0) {
        const double part = bisect(f, v, std::min(v + 1.0, 709.0), 0);
        acc += part;
        if (part <= 1e-18 * acc) break;
    }
    return acc;
}

double RadialLaw::cdf(double x) const {
    if (!(x > 0.0)) return 0.0;
    if (x < nodes_.front()) return integrate(0.0, x);
    if (x >= nodes_.back()) return 1.0 - upper_tail(x);
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    if (lower_[k] <= 0.5) return lower_[k] + integrate(nodes_[k], x);
    return 1.0 - (upper_[k + 1] + integrate(x, nodes_[k + 1]));
}

double RadialLaw::survival(double x) const {
    if (!(x > 0.0)) return 1.0;
    if (x < nodes_.front()) return 1.0 - integrate(0.0, x);
    if (x >= nodes_.back()) return upper_tail(x);
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    if (upper_[k + 1] <= 0.5) return upper_[k + 1] + integrate(x, nodes_[k + 1]);
    return 1.0 - (lower_[k] + integrate(nodes_[k], x));
}

double RadialLaw::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("radial quantile requires p in (0, 1)");
    return p <= 0.5 ? solve(p, false) : solve(1.0 - p, true);
}

bool RadialLaw::table_guess(double target, bool from_upper, double& lo, double& hi, double& x) const {
    const std::size_t n = nodes_.size();
    if ((!from_upper && target < lower_.front()) || (from_upper && target < upper_.back())) return false;
    // Panel [x_k, x_{k+1}] containing the target, then cubic Hermite
    // interpolation of x as a function of the tabulated probability.
    std::size_t k = 0;
    if (!from_upper) {
        const auto it = std::upper_bound(lower_.begin(), lower_.end(), target);
        k = static_cast<std::size_t>(it - lower_.begin()) - 1;
    } else {
        const auto it = std::upper_bound(upper_.begin(), upper_.end(), target,
                                         [](double t, double u) { return t > u; });
        k = static_cast<std::size_t>(it - upper_.begin()) - 1;
    }
    k = std::min(k, n - 2);
    lo = nodes_[k];
    hi = nodes_[k + 1];
    const double sign = from_upper ? -1.0 : 1.0;
    const double p0 = from_upper ? upper_[k] : lower_[k];
    const double p1 = from_upper ? upper_[k + 1] : lower_[k + 1];
    const double dp = p1 - p0;
    x = std::sqrt(lo * hi);
    if (dp != 0.0 && dens_[k] > 0.0 && dens_[k + 1] > 0.0) {
        const double s = (target - p0) / dp;
        const double m0 = sign / dens_[k] * dp;
        const double m1 = sign / dens_[k + 1] * dp;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double guess = (2 * s3 - 3 * s2 + 1) * lo + (s3 - 2 * s2 + s) * m0 +
                             (-2 * s3 + 3 * s2) * hi + (s3 - s2) * m1;
        if (guess > lo && guess < hi) {
            x = guess;
        } else {
            x = lo + std::clamp(s, 0.0, 1.0) * (hi - lo);
        }
    }
    return true;
}

// Solves F(x) = target (from_upper == false) or S(x) = target (from_upper == true).
double RadialLaw::solve(double target, bool from_upper) const {
    const auto value = [&](double x) { return from_upper ? survival(x) : cdf(x); };
    // residual r(x) = value(x) - target is increasing for the CDF, decreasing for S.
    const double sign = from_upper ? -1.0 : 1.0;

    double lo = 0.0;
    double hi = 0.0;
    double x = 0.0;
    if (!table_guess(target, from_upper, lo, hi, x)) {
        if (!from_upper) {
            lo = 0.0;
            hi = nodes_.front();
            x = 0.5 * hi;
        } else {
            lo = nodes_.back();
            hi = lo * 2.0;
            while (survival(hi) > target) {
                lo = hi;
                hi *= 2.0;
                if (!std::isfinite(hi)) throw NumericError("radial quantile beyond representable range");
            }
            x = std::sqrt(lo * hi);
        }
    }

    // Safeguarded Newton on the bracket [lo, hi].
    for (int iter = 0; iter < 100; ++iter) {
        const double r = sign * (value(x) - target);
        if (r == 0.0) return x;
        if (r > 0.0) hi = x; else lo = x;
        const double f = density(x);
        double next = (f > 0.0 && std::isfinite(f)) ? x - r / f : std::numeric_limits<double>::quiet_NaN();
        if (std::abs(next - x) <= 1e-15 * x || std::abs(r) <= 1e-15 * target) return x;
        if (!(next > lo && next < hi)) next = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        if (hi - lo <= 4e-16 * hi) return next;
        x = next;
    }
    return x;
}

const RadialLaw& radial_law(const GeneratorSpec& spec) {
    static std::mutex mutex;
    static std::map<std::pair<int, double>, std::unique_ptr<const RadialLaw>> cache;
    validate(spec);
    const auto key = std::make_pair(static_cast<int>(spec.family), spec.extra.value_or(0.0));
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_unique<const RadialLaw>(spec)).first;
    return *it->second;
}

double radial_cdf(const GeneratorSpec& spec, double x) {
    if (x < 0.0) throw DomainError("radial cdf requires x >= 0");
    return radial_law(spec).cdf(x);
}

double radial_quantile(const GeneratorSpec& spec, double p) {
    return radial_law(spec).quantile(p);
}

}  // namespace blsacd
