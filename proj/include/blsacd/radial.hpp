#pragma once

#include <vector>

#include "blsacd/generators.hpp"

namespace blsacd {

/// Law of the quadratic form (squared radius) of the standardized bivariate
/// log-symmetric vector: density (pi / Z) g(x) on x > 0.
///
/// Construction tabulates the CDF and survival function on a log-spaced grid,
/// each panel integrated by adaptive Gauss-Kronrod. Queries integrate only the
/// partial panel, from whichever side keeps the most significant digits.
/// Instances are immutable and safe to share between threads.
class RadialLaw {
public:
    explicit RadialLaw(GeneratorSpec spec);

    const GeneratorSpec& spec() const { return spec_; }

    double density(double x) const;
    double cdf(double x) const;
    double survival(double x) const;
    /// Inverse CDF for p in (0, 1); throws DomainError otherwise.
    double quantile(double p) const;

    /// |F(inf) - 1| implied by the tabulated integrals and the closed-form Z.
    double mass_defect() const { return mass_defect_; }

private:
    double integrate(double a, double b) const;
    template <class F>
    static double bisect(const F& f, double a, double b, int depth);
    double upper_tail(double x) const;
    double solve(double target, bool from_upper) const;
    // Initial guess and bracket for solve(); false when outside the table.
    bool table_guess(double target, bool from_upper, double& lo, double& hi, double& x) const;

    GeneratorSpec spec_;
    double scale_;                 // pi / Z
    std::vector<double> nodes_;    // x_0 < ... < x_n
    std::vector<double> lower_;    // F(x_k)
    std::vector<double> upper_;    // 1 - F(x_k), accumulated from the right
    std::vector<double> dens_;     // f(x_k)
    double mass_defect_ = 0.0;
};

/// Shared, lazily-built law for `spec` (thread-safe cache).
const RadialLaw& radial_law(const GeneratorSpec& spec);

double radial_cdf(const GeneratorSpec& spec, double x);
double radial_quantile(const GeneratorSpec& spec, double p);

}  // namespace blsacd
