#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace blsacd {

enum class Family {
    LogNormal,
    LogStudentT,
    LogHyperbolic,
    LogLaplace,
    LogSlash,
    LogPowerExponential,
    LogLogistic,
};

inline constexpr Family kAllFamilies[] = {
    Family::LogNormal,  Family::LogStudentT,         Family::LogHyperbolic, Family::LogLaplace,
    Family::LogSlash,   Family::LogPowerExponential, Family::LogLogistic,
};

/// Density-generator family plus its extra shape parameter (nu), when the family has one.
struct GeneratorSpec {
    Family family = Family::LogNormal;
    std::optional<double> extra;

    static GeneratorSpec lognormal() { return {Family::LogNormal, std::nullopt}; }
    static GeneratorSpec with_nu(Family f, double nu) { return {f, nu}; }

    double nu() const { return extra.value_or(0.0); }
    bool operator==(const GeneratorSpec&) const = default;
};

bool family_has_extra(Family f);

/// CLI/config token: lognormal, logt, loghyperbolic, loglaplace, logslash, logpexp, loglogistic.
std::string_view family_token(Family f);
Family parse_family(std::string_view token);  // throws DomainError

/// Human-readable label, e.g. "Log-Student-t".
std::string_view family_label(Family f);

/// Throws DomainError unless the extra parameter matches the family's requirements.
void validate(const GeneratorSpec& spec);
bool is_valid(const GeneratorSpec& spec);

/// True for the generators that are unbounded or undefined at x = 0 (log-Laplace, log-slash).
bool singular_at_zero(Family f);

// Density generator g_c and its log-derivatives. All throw DomainError for x outside the
// family's domain (x < 0, or x == 0 for singular_at_zero families).
double eval_g(const GeneratorSpec& spec, double x);
double log_g(const GeneratorSpec& spec, double x);
/// h(x) = g'(x) / g(x)
double h(const GeneratorSpec& spec, double x);
/// h'(x)
double h_prime(const GeneratorSpec& spec, double x);

/// Closed-form normalizing constant of the bivariate density.
double z_const(const GeneratorSpec& spec);
/// pi * integral_0^inf g(u) du by adaptive quadrature; throws NumericError if it does not converge.
double z_const_numeric(const GeneratorSpec& spec);

namespace special {
/// log K_0(x) for x > 0, stable for large x.
double log_bessel_k0(double x);
/// K_1(x) / K_0(x) for x > 0.
double bessel_k1_over_k0(double x);
}  // namespace special

}  // namespace blsacd
