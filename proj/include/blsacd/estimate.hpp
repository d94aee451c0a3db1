#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blsacd/model.hpp"

namespace blsacd {

/// -H is not positive definite; eigenvalues() holds the spectrum of -H.
class SingularHessian : public std::runtime_error {
public:
    SingularHessian(const std::string& what, Eigen::VectorXd eig)
        : std::runtime_error(what), eig_(std::move(eig)) {}
    const Eigen::VectorXd& eigenvalues() const noexcept { return eig_; }

private:
    Eigen::VectorXd eig_;
};

struct InfoCriteria {
    double aic = 0.0;
    double bic = 0.0;
    /// Small-sample corrected AIC, aic + 2k(k+1)/(T-k-1); NaN when T <= k+1.
    double caic = 0.0;
    bool caic_defined = true;
};

InfoCriteria info_criteria(double loglik, int k, std::size_t n_obs);

struct FitOptions {
    /// Selects the Hessian used for standard errors. The optimizer always
    /// climbs the exact gradient of the likelihood.
    GradientMode gradient_mode = GradientMode::ExactRecursive;
    LikelihoodOptions likelihood;
    int starts = 5;
    int max_iter = 1000;
    double grad_tol = 1e-6;
    double step_tol = 1e-9;
    std::optional<ParamVector> start;
    /// Count a profiled nu in k.
    bool count_nu = true;
    std::uint64_t seed = 20240601;
};

struct FitResult {
    ModelSpec spec;
    ParamVector theta_hat;
    /// NaN entries are unavailable.
    Eigen::VectorXd se;
    bool se_available = false;
    /// Full log-likelihood at the estimate, including -sum log y and -T log Z.
    double loglik_at_max = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double caic = 0.0;
    std::optional<double> nu_hat;
    bool converged = false;
    int iterations = 0;
    double grad_norm_at_max = 0.0;
    std::string presample_convention;
    GradientMode gradient_mode = GradientMode::ExactRecursive;

    int k = 0;
    std::size_t n_obs = 0;
    std::size_t burn_in = 0;
    int starts_used = 0;
    bool at_boundary = false;
    std::size_t floor_hits = 0;
    /// Profile (nu, maximized loglik) pairs when nu was profiled.
    std::vector<std::pair<double, double>> profile;
    std::vector<std::string> warnings;
};

FitResult fit(const ModelSpec& spec, const BiSeries& series, const FitOptions& options = {});

/// Profiles nu over the grid, then refines by golden section between the
/// neighbours of the best grid point.
FitResult fit_profile_nu(const ModelSpec& spec, const BiSeries& series, const std::vector<double>& nu_grid,
                         const FitOptions& options = {});

/// Default 8-point profile grid and golden-section tolerance per family.
std::vector<double> default_nu_grid(Family family);
double default_nu_tolerance(Family family);

/// sqrt(diag((-H)^{-1})). Falls back to a finite-difference Hessian of the
/// exact score when the analytic one is not negative definite; throws
/// SingularHessian if that fails too.
Eigen::VectorXd standard_errors(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& series,
                                GradientMode mode = GradientMode::ExactRecursive,
                                const LikelihoodOptions& opts = {});

/// Moment-based starting point.
ParamVector default_start(const ModelSpec& spec, const BiSeries& series);

std::string presample_description(const LikelihoodOptions& opts);

}  // namespace blsacd
