#pragma once

// Test-only oracles: naive likelihood evaluation, a frozen-path likelihood
// for the fixed-regressor derivatives, and finite differences.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "blsacd/generators.hpp"
#include "blsacd/model.hpp"

namespace testsupport {

using namespace blsacd;

/// Section-3 style truth for BLS-ACD(1,1,1,1).
inline ParamVector paper_truth(double rho) {
    ParamVector th;
    th.sigma1 = 1.0;
    th.sigma2 = 1.0;
    th.rho = rho;
    th.margin1 = {0.2, {0.7}, {0.1}};
    th.margin2 = {0.2, {0.7}, {0.1}};
    return th;
}

/// Milder truth for heavy-tailed families: y/eta enters the recursion
/// linearly, so sigma = 1 lets a single Student-t draw blow up log(eta).
inline ParamVector heavy_truth(double rho) {
    ParamVector th = paper_truth(rho);
    th.sigma1 = th.sigma2 = 0.4;
    th.margin1.beta = {0.05};
    th.margin2.beta = {0.05};
    return th;
}

/// Gaussian-innovation series from the median recursion, written
/// independently of the library sampler.
inline BiSeries gaussian_series(const ModelSpec& spec, const ParamVector& th, std::size_t n,
                                unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    BiSeries s;
    std::vector<double> le[2], ratio[2];
    for (std::size_t t = 0; t < n; ++t) {
        const double z1 = nd(rng);
        const double z2 = nd(rng);
        const double w[2] = {z1, th.rho * z1 + std::sqrt(1 - th.rho * th.rho) * z2};
        for (int i = 0; i < 2; ++i) {
            const MarginDynamics& m = th.margin(i);
            double l = m.omega;
            for (int j = 1; j <= spec.p(i); ++j) l += m.alpha[j - 1] * (t >= std::size_t(j) ? le[i][t - j] : 0.0);
            for (int j = 1; j <= spec.q(i); ++j) l += m.beta[j - 1] * (t >= std::size_t(j) ? ratio[i][t - j] : 1.0);
            const double y = std::exp(l + th.sigma(i) * w[i]);
            le[i].push_back(l);
            ratio[i].push_back(y / std::exp(l));
            (i == 0 ? s.y1 : s.y2).push_back(y);
        }
    }
    return s;
}

/// Log-likelihood from the joint density, term by term; include_jacobian adds
/// -log(y1 y2) - log Z.
inline double naive_loglik(const ModelSpec& spec, const ParamVector& th, const BiSeries& s,
                           bool include_jacobian) {
    std::vector<double> le[2];
    double total = 0.0;
    const double zc = z_const(spec.generator);
    for (std::size_t t = 0; t < s.size(); ++t) {
        double w[2];
        for (int i = 0; i < 2; ++i) {
            const MarginDynamics& m = th.margin(i);
            const auto& y = i == 0 ? s.y1 : s.y2;
            double l = m.omega;
            for (int j = 1; j <= spec.p(i); ++j) l += m.alpha[j - 1] * (t >= std::size_t(j) ? le[i][t - j] : 0.0);
            for (int j = 1; j <= spec.q(i); ++j)
                l += m.beta[j - 1] * (t >= std::size_t(j) ? y[t - j] / std::exp(le[i][t - j]) : 1.0);
            le[i].push_back(l);
            w[i] = std::log(y[t] / std::exp(l)) / th.sigma(i);
        }
        const double r = th.rho;
        const double q = (w[0] * w[0] - 2 * r * w[0] * w[1] + w[1] * w[1]) / (1 - r * r);
        double dens = eval_g(spec.generator, q) /
                      (th.sigma1 * th.sigma2 * std::sqrt(1 - r * r));
        if (include_jacobian) dens /= s.y1[t] * s.y2[t] * zc;
        total += std::log(dens);
    }
    return total;
}

/// Log-likelihood with the lagged log(eta) and y/eta regressors frozen at the
/// path implied by theta0.
inline double frozen_loglik(const ModelSpec& spec, const ParamVector& theta0, const ParamVector& th,
                            const BiSeries& s) {
    const MedianPaths base = recurse_medians(spec, theta0, s);
    double total = -double(s.size()) * (std::log(th.sigma1) + std::log(th.sigma2) +
                                        0.5 * std::log(1 - th.rho * th.rho));
    for (std::size_t t = 0; t < s.size(); ++t) {
        double w[2];
        for (int i = 0; i < 2; ++i) {
            const MarginDynamics& m = th.margin(i);
            const auto& y = i == 0 ? s.y1 : s.y2;
            const auto& eta = base.eta(i);
            double l = m.omega;
            for (int j = 1; j <= spec.p(i); ++j)
                l += m.alpha[j - 1] * (t >= std::size_t(j) ? std::log(eta[t - j]) : 0.0);
            for (int j = 1; j <= spec.q(i); ++j)
                l += m.beta[j - 1] * (t >= std::size_t(j) ? y[t - j] / eta[t - j] : 1.0);
            w[i] = (std::log(y[t]) - l) / th.sigma(i);
        }
        const double r = th.rho;
        total += log_g(spec.generator, (w[0] * w[0] - 2 * r * w[0] * w[1] + w[1] * w[1]) / (1 - r * r));
    }
    return total;
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = rel_step * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd a = x, b = x;
        a[j] += h;
        b[j] -= h;
        g[j] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step) {
    Eigen::MatrixXd jac(x.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = rel_step * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd a = x, b = x;
        a[j] += h;
        b[j] -= h;
        jac.col(j) = (f(a) - f(b)) / (2 * h);
    }
    return jac;
}

/// Second differences of a scalar function.
inline Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const Eigen::VectorXd& x, double rel_step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd hm(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double hj = rel_step * std::max(1.0, std::abs(x[j]));
        for (Eigen::Index k = j; k < n; ++k) {
            const double hk = rel_step * std::max(1.0, std::abs(x[k]));
            auto at = [&](double sj, double sk) {
                Eigen::VectorXd y = x;
                y[j] += sj * hj;
                y[k] += sk * hk;
                return f(y);
            };
            const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hj * hk);
            hm(j, k) = v;
            hm(k, j) = v;
        }
    }
    return hm;
}

/// Componentwise |a - b| <= rel * max(|b|, floor).
inline double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = std::abs(a.data()[i] - b.data()[i]) / std::max(std::abs(b.data()[i]), floor);
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace testsupport
