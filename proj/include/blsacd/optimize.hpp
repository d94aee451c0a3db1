#pragma once

#include <Eigen/Dense>

#include <functional>

namespace blsacd {

/// Returns false when the point is infeasible (e.g. the recursion diverged);
/// the line search then backs off. `grad` may be null.
using SmoothObjective = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd* grad)>;

struct BfgsOptions {
    int max_iter = 500;
    double grad_tol = 1e-8;   // on the infinity norm of the (projected) gradient
    double step_tol = 1e-12;  // on the infinity norm of the accepted step
    double f_tol = 1e-15;     // relative decrease
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    int evaluations = 0;
    bool grad_converged = false;
    bool at_bound = false;
};

/// Minimizes on the box [lower, upper] with a projected BFGS iteration and
/// backtracking line search. Bounds may be +-infinity.
BfgsResult minimize_bfgs(const SmoothObjective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BfgsOptions& opts = {});

}  // namespace blsacd
