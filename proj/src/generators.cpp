#include "blsacd/generators.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "blsacd/errors.hpp"

namespace blsacd {

namespace {

constexpr double kPi = std::numbers::pi;

// Above this argument K_0/K_1 come from the scaled asymptotic series; the
// smallest retained term there is of order exp(-2x).
constexpr double kBesselAsymptoticFrom = 30.0;

// exp(x) K_nu(x) for large x, nu in {0, 1}.
double scaled_bessel_k_asymptotic(int order, double x) {
    const double mu = 4.0 * order * order;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (k * 8.0 * x);
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return std::sqrt(kPi / (2.0 * x)) * sum;
}

// log of the lower incomplete gamma function gamma(a, z), z > 0.
double log_lower_gamma(double a, double z) {
    if (z < a + 1.0) {
        // gamma(a,z) = z^a e^{-z} sum_n z^n / (a (a+1) ... (a+n))
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= z / (a + n);
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return a * std::log(z) - z + std::log(sum);
    }
    return std::lgamma(a) + std::log(boost::math::gamma_p(a, z));
}

void require_argument(const GeneratorSpec& spec, double x) {
    if (!(x >= 0.0) || std::isnan(x)) {
        throw DomainError("density generator evaluated at negative or NaN argument");
    }
    if (x == 0.0 && singular_at_zero(spec.family)) {
        throw DomainError(std::string(family_token(spec.family)) +
                          " generator is not evaluated at 0");
    }
}

double slash_log_g(double nu, double x) {
    const double a = 0.5 * (nu + 1.0);
    const double z = 0.5 * x;
    if (z < a + 1.0) {
        // x^{-a} (x/2)^a e^{-x/2} S  =  2^{-a} e^{-x/2} S, without forming x^{-a}.
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= z / (a + n);
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return -a * std::numbers::ln2 - z + std::log(sum);
    }
    return -a * std::log(x) + log_lower_gamma(a, z);
}

// Five-point central differences with a step relative to x; the slash generator has no
// convenient closed-form derivative of the incomplete gamma ratio.
constexpr double kSlashRelStep = 1e-3;

// The series branch of slash_log_g is analytic through 0, so near the origin the
// step may straddle it.
double slash_step(double x) { return kSlashRelStep * std::max(x, 0.1); }

double slash_h(double nu, double x) {
    const double d = slash_step(x);
    const auto f = [nu](double u) { return slash_log_g(nu, u); };
    return (f(x - 2 * d) - 8 * f(x - d) + 8 * f(x + d) - f(x + 2 * d)) / (12 * d);
}

double slash_h_prime(double nu, double x) {
    const double d = slash_step(x);
    const auto f = [nu](double u) { return slash_log_g(nu, u); };
    return (-f(x - 2 * d) + 16 * f(x - d) - 30 * f(x) + 16 * f(x + d) - f(x + 2 * d)) /
           (12 * d * d);
}

}  // namespace

namespace special {

double log_bessel_k0(double x) {
    if (!(x > 0.0)) throw DomainError("K_0 requires a positive argument");
    if (x < kBesselAsymptoticFrom) return std::log(boost::math::cyl_bessel_k(0, x));
    return std::log(scaled_bessel_k_asymptotic(0, x)) - x;
}

double bessel_k1_over_k0(double x) {
    if (!(x > 0.0)) throw DomainError("K_1/K_0 requires a positive argument");
    if (x < kBesselAsymptoticFrom) {
        return boost::math::cyl_bessel_k(1, x) / boost::math::cyl_bessel_k(0, x);
    }
    return scaled_bessel_k_asymptotic(1, x) / scaled_bessel_k_asymptotic(0, x);
}

}  // namespace special

bool family_has_extra(Family f) {
    switch (f) {
        case Family::LogStudentT:
        case Family::LogHyperbolic:
        case Family::LogSlash:
        case Family::LogPowerExponential:
            return true;
        default:
            return false;
    }
}

std::string_view family_token(Family f) {
    switch (f) {
        case Family::LogNormal: return "lognormal";
        case Family::LogStudentT: return "logt";
        case Family::LogHyperbolic: return "loghyperbolic";
        case Family::LogLaplace: return "loglaplace";
        case Family::LogSlash: return "logslash";
        case Family::LogPowerExponential: return "logpexp";
        case Family::LogLogistic: return "loglogistic";
    }
    return "?";
}

std::string_view family_label(Family f) {
    switch (f) {
        case Family::LogNormal: return "Log-normal";
        case Family::LogStudentT: return "Log-Student-t";
        case Family::LogHyperbolic: return "Log-hyperbolic";
        case Family::LogLaplace: return "Log-Laplace";
        case Family::LogSlash: return "Log-slash";
        case Family::LogPowerExponential: return "Log-power-exponential";
        case Family::LogLogistic: return "Log-logistic";
    }
    return "?";
}

Family parse_family(std::string_view token) {
    for (Family f : kAllFamilies) {
        if (family_token(f) == token) return f;
    }
    throw DomainError("unknown generator family '" + std::string(token) + "'");
}

bool singular_at_zero(Family f) {
    return f == Family::LogLaplace || f == Family::LogSlash;
}

void validate(const GeneratorSpec& spec) {
    const auto fail = [&](const char* what) {
        throw DomainError(std::string(family_token(spec.family)) + what);
    };
    if (!family_has_extra(spec.family)) {
        if (spec.extra) fail(" takes no extra parameter");
        return;
    }
    if (!spec.extra) fail(" requires an extra parameter (nu)");
    const double nu = *spec.extra;
    if (!std::isfinite(nu)) fail(": nu must be finite");
    switch (spec.family) {
        case Family::LogStudentT:
        case Family::LogHyperbolic:
            if (!(nu > 0.0)) fail(": nu must be > 0");
            break;
        case Family::LogSlash:
            if (!(nu > 1.0)) fail(": nu must be > 1");
            break;
        case Family::LogPowerExponential:
            if (!(nu > -1.0 && nu <= 1.0)) fail(": nu must lie in (-1, 1]");
            break;
        default:
            break;
    }
}

bool is_valid(const GeneratorSpec& spec) {
    try {
        validate(spec);
        return true;
    } catch (const DomainError&) {
        return false;
    }
}

double log_g(const GeneratorSpec& spec, double x) {
    validate(spec);
    require_argument(spec, x);
    const double nu = spec.nu();
    switch (spec.family) {
        case Family::LogNormal:
            return -0.5 * x;
        case Family::LogStudentT:
            return -0.5 * (nu + 2.0) * std::log1p(x / nu);
        case Family::LogHyperbolic:
            return -nu * std::sqrt(1.0 + x);
        case Family::LogLaplace:
            return special::log_bessel_k0(std::sqrt(2.0 * x));
        case Family::LogSlash:
            return slash_log_g(nu, x);
        case Family::LogPowerExponential:
            return -0.5 * std::pow(x, 1.0 / (1.0 + nu));
        case Family::LogLogistic:
            return -x - 2.0 * std::log1p(std::exp(-x));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double eval_g(const GeneratorSpec& spec, double x) {
    return std::exp(log_g(spec, x));
}

double h(const GeneratorSpec& spec, double x) {
    validate(spec);
    require_argument(spec, x);
    const double nu = spec.nu();
    switch (spec.family) {
        case Family::LogNormal:
            return -0.5;
        case Family::LogStudentT:
            return -(nu + 2.0) / (2.0 * (nu + x));
        case Family::LogHyperbolic:
            return -nu / (2.0 * std::sqrt(1.0 + x));
        case Family::LogLaplace: {
            // g = K0(s), s = sqrt(2x), ds/dx = 1/s, K0' = -K1
            const double s = std::sqrt(2.0 * x);
            return -special::bessel_k1_over_k0(s) / s;
        }
        case Family::LogSlash:
            return slash_h(nu, x);
        case Family::LogPowerExponential: {
            const double c = 1.0 / (1.0 + nu);
            if (x == 0.0) {
                if (c == 1.0) return -0.5;
                throw DomainError("logpexp: h undefined at 0 for nu != 0");
            }
            return -0.5 * c * std::pow(x, c - 1.0);
        }
        case Family::LogLogistic:
            return -std::tanh(0.5 * x);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double h_prime(const GeneratorSpec& spec, double x) {
    validate(spec);
    require_argument(spec, x);
    const double nu = spec.nu();
    switch (spec.family) {
        case Family::LogNormal:
            return 0.0;
        case Family::LogStudentT:
            return (nu + 2.0) / (2.0 * (nu + x) * (nu + x));
        case Family::LogHyperbolic:
            return nu / (4.0 * std::pow(1.0 + x, 1.5));
        case Family::LogLaplace: {
            // with R = K1/K0: dh/dx = (1 + 2R/s - R^2) / s^2
            const double s = std::sqrt(2.0 * x);
            const double r = special::bessel_k1_over_k0(s);
            return (1.0 + 2.0 * r / s - r * r) / (s * s);
        }
        case Family::LogSlash:
            return slash_h_prime(nu, x);
        case Family::LogPowerExponential: {
            const double c = 1.0 / (1.0 + nu);
            if (c == 1.0) return 0.0;
            if (x == 0.0) throw DomainError("logpexp: h' undefined at 0 for nu != 0");
            return -0.5 * c * (c - 1.0) * std::pow(x, c - 2.0);
        }
        case Family::LogLogistic: {
            const double ch = std::cosh(0.5 * x);
            return -0.5 / (ch * ch);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double z_const(const GeneratorSpec& spec) {
    validate(spec);
    const double nu = spec.nu();
    switch (spec.family) {
        case Family::LogNormal:
            return 2.0 * kPi;
        case Family::LogStudentT:
            return std::exp(std::lgamma(0.5 * nu) - std::lgamma(0.5 * (nu + 2.0))) * nu * kPi;
        case Family::LogHyperbolic:
            return 2.0 * kPi * (nu + 1.0) * std::exp(-nu) / (nu * nu);
        case Family::LogLaplace:
            return kPi;
        case Family::LogSlash:
            return kPi / (nu - 1.0) * std::pow(2.0, 0.5 * (3.0 - nu));
        case Family::LogPowerExponential:
            return std::pow(2.0, nu + 1.0) * (1.0 + nu) * std::tgamma(1.0 + nu) * kPi;
        case Family::LogLogistic:
            return 0.5 * kPi;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double z_const_numeric(const GeneratorSpec& spec) {
    validate(spec);
    using boost::math::quadrature::gauss_kronrod;
    // Over v = log u the endpoint singularities at 0 (log for Laplace) and the power
    // tails both become exponentially decaying.
    const auto integrand = [&spec](double v) {
        const double u = std::exp(v);
        if (u == 0.0 || !std::isfinite(u)) return 0.0;
        return eval_g(spec, u) * u;
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    double err_head = 0.0;
    double err_tail = 0.0;
    const double head = gauss_kronrod<double, 61>::integrate(integrand, -inf, 0.0, 15, 1e-13, &err_head);
    const double tail = gauss_kronrod<double, 61>::integrate(integrand, 0.0, inf, 15, 1e-13, &err_tail);
    const double total = head + tail;
    if (!std::isfinite(total) || !(total > 0.0) || (err_head + err_tail) > 1e-9 * total) {
        throw NumericError("normalizing-constant quadrature did not converge for " +
                           std::string(family_token(spec.family)));
    }
    return kPi * total;
}

}  // namespace blsacd
