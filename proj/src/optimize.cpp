#include "blsacd/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "blsacd/errors.hpp"

namespace blsacd {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Gradient with components pushing outward at an active bound zeroed.
Eigen::VectorXd projected_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi) {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] <= lo[i] && g[i] > 0.0) pg[i] = 0.0;
        if (x[i] >= hi[i] && g[i] < 0.0) pg[i] = 0.0;
    }
    return pg;
}

}  // namespace

BfgsResult minimize_bfgs(const SmoothObjective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const BfgsOptions& opts) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = project(x0, lower, upper);
    res.grad.resize(n);
    ++res.evaluations;
    if (!f(res.x, res.value, &res.grad) || !std::isfinite(res.value) || !res.grad.allFinite()) {
        throw NumericError("objective is not finite at the starting point");
    }

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    // Initial scaling so the first step is of unit order.
    const double g0 = res.grad.cwiseAbs().maxCoeff();
    if (g0 > 1.0) hinv /= g0;

    Eigen::VectorXd gnew(n);
    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        const Eigen::VectorXd pg = projected_grad(res.x, res.grad, lower, upper);
        if (pg.cwiseAbs().maxCoeff() <= opts.grad_tol) {
            res.grad_converged = true;
            break;
        }
        Eigen::VectorXd dir = -hinv * res.grad;
        // Freeze coordinates held at a bound.
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((res.x[i] <= lower[i] && dir[i] < 0.0) || (res.x[i] >= upper[i] && dir[i] > 0.0)) dir[i] = 0.0;
        }
        double slope = dir.dot(res.grad);
        if (!(slope < 0.0)) {
            hinv.setIdentity();
            dir = -pg;
            slope = dir.dot(res.grad);
            if (!(slope < 0.0)) break;
        }

        double step = 1.0;
        double fnew = 0.0;
        Eigen::VectorXd xnew(n);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xnew = project(res.x + step * dir, lower, upper);
            ++res.evaluations;
            const bool ok = f(xnew, fnew, &gnew);
            if (ok && std::isfinite(fnew) && gnew.allFinite() &&
                fnew <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= ok && std::isfinite(fnew) ? 0.5 : 0.1;
        }
        if (!accepted) {
            if (hinv.isIdentity()) break;
            hinv.setIdentity();
            continue;
        }

        const Eigen::VectorXd s = xnew - res.x;
        const Eigen::VectorXd y = gnew - res.grad;
        const double fold = res.value;
        res.x = xnew;
        res.value = fnew;
        res.grad = gnew;

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (res.iterations == 0) hinv *= sy / y.squaredNorm();
            const double r = 1.0 / sy;
            const Eigen::VectorXd hy = hinv * y;
            hinv += (r * r * (sy + y.dot(hy))) * (s * s.transpose()) - r * (hy * s.transpose() + s * hy.transpose());
        }
        if (s.cwiseAbs().maxCoeff() <= opts.step_tol) break;
        if (std::abs(fold - fnew) <= opts.f_tol * std::max(1.0, std::abs(fnew))) {
            // One more check of the gradient on the next pass.
            const Eigen::VectorXd pgn = projected_grad(res.x, res.grad, lower, upper);
            res.grad_converged = pgn.cwiseAbs().maxCoeff() <= opts.grad_tol;
            break;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (res.x[i] <= lower[i] || res.x[i] >= upper[i]) res.at_bound = true;
    }
    return res;
}

}  // namespace blsacd
