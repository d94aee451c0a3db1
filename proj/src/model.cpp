#include "blsacd/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blsacd/errors.hpp"

namespace blsacd {

namespace {

// |log eta| beyond this overflows exp() in eta or in y/eta.
constexpr double kLogEtaLimit = 700.0;

// Median path of one margin, with first and second derivatives of log(eta_t)
// with respect to that margin's (omega, alpha_1..p, beta_1..q).
struct MarginPath {
    int m = 0;                       // 1 + p + q
    std::vector<double> log_eta;     // T
    std::vector<double> ratio;       // y_t / eta_t
    std::vector<double> d1;          // T x m
    std::vector<double> d2;          // T x m x m (exact Hessian only)
};

MarginPath run_margin(const MarginDynamics& dyn, const std::vector<double>& y, double presample_log_eta,
                      EvalOrder order, GradientMode mode) {
    const std::size_t n = y.size();
    const int p = static_cast<int>(dyn.alpha.size());
    const int q = static_cast<int>(dyn.beta.size());
    MarginPath path;
    path.m = 1 + p + q;
    const std::size_t m = static_cast<std::size_t>(path.m);
    path.log_eta.resize(n);
    path.ratio.resize(n);
    const bool first = order != EvalOrder::Value;
    const bool second = order == EvalOrder::Hessian && mode == GradientMode::ExactRecursive;
    if (first) path.d1.assign(n * m, 0.0);
    if (second) path.d2.assign(n * m * m, 0.0);

    const auto lagged_log_eta = [&](std::size_t t, int j) {
        return t >= static_cast<std::size_t>(j) ? path.log_eta[t - j] : presample_log_eta;
    };
    const auto lagged_ratio = [&](std::size_t t, int j) {
        return t >= static_cast<std::size_t>(j) ? path.ratio[t - j] : 1.0;
    };

    for (std::size_t t = 0; t < n; ++t) {
        double le = dyn.omega;
        for (int j = 1; j <= p; ++j) le += dyn.alpha[j - 1] * lagged_log_eta(t, j);
        for (int j = 1; j <= q; ++j) le += dyn.beta[j - 1] * lagged_ratio(t, j);
        if (!std::isfinite(le) || std::abs(le) > kLogEtaLimit) {
            throw DivergenceError("conditional median recursion diverged", t + 1);
        }
        path.log_eta[t] = le;
        path.ratio[t] = y[t] * std::exp(-le);

        if (!first) continue;
        double* g = &path.d1[t * m];
        // direct terms
        g[0] = 1.0;
        for (int j = 1; j <= p; ++j) g[j] = lagged_log_eta(t, j);
        for (int j = 1; j <= q; ++j) g[p + j] = lagged_ratio(t, j);
        if (mode == GradientMode::PaperLiteral) continue;

        // d(ratio_s) = -ratio_s d(log eta_s); presample values are constants.
        for (int j = 1; j <= p; ++j) {
            if (t < static_cast<std::size_t>(j)) break;
            const double* lag = &path.d1[(t - j) * m];
            for (std::size_t k = 0; k < m; ++k) g[k] += dyn.alpha[j - 1] * lag[k];
        }
        for (int j = 1; j <= q; ++j) {
            if (t < static_cast<std::size_t>(j)) break;
            const double* lag = &path.d1[(t - j) * m];
            const double c = -dyn.beta[j - 1] * path.ratio[t - j];
            for (std::size_t k = 0; k < m; ++k) g[k] += c * lag[k];
        }

        if (!second) continue;
        double* hh = &path.d2[t * m * m];
        for (int j = 1; j <= p; ++j) {
            if (t < static_cast<std::size_t>(j)) break;
            const double* lag1 = &path.d1[(t - j) * m];
            const double* lag2 = &path.d2[(t - j) * m * m];
            const double a = dyn.alpha[j - 1];
            for (std::size_t k = 0; k < m * m; ++k) hh[k] += a * lag2[k];
            // alpha_j multiplies log eta_{t-j}
            const std::size_t ia = static_cast<std::size_t>(j);
            for (std::size_t k = 0; k < m; ++k) {
                hh[ia * m + k] += lag1[k];
                hh[k * m + ia] += lag1[k];
            }
        }
        for (int j = 1; j <= q; ++j) {
            if (t < static_cast<std::size_t>(j)) break;
            const double* lag1 = &path.d1[(t - j) * m];
            const double* lag2 = &path.d2[(t - j) * m * m];
            const double r = path.ratio[t - j];
            const double b = dyn.beta[j - 1];
            // d2(ratio) = -r d2(L) + r dL dL^T
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t c = 0; c < m; ++c) {
                    hh[a * m + c] += b * r * (lag1[a] * lag1[c] - lag2[a * m + c]);
                }
            }
            // beta_j multiplies ratio_{t-j}
            const std::size_t ib = static_cast<std::size_t>(p + j);
            for (std::size_t k = 0; k < m; ++k) {
                hh[ib * m + k] -= r * lag1[k];
                hh[k * m + ib] -= r * lag1[k];
            }
        }
    }
    return path;
}

}  // namespace

std::size_t ModelSpec::num_params() const {
    return static_cast<std::size_t>(5 + p1 + q1 + p2 + q2);
}

std::size_t ModelSpec::margin_offset(int margin) const {
    return margin == 0 ? 3u : static_cast<std::size_t>(4 + p1 + q1);
}

void ModelSpec::validate() const {
    for (int o : {p1, q1, p2, q2}) {
        if (o < 0 || o > kMaxOrder) throw DomainError("lag orders must lie in [0, 10]");
    }
    if (p1 + q1 < 1 || p2 + q2 < 1) throw DomainError("each margin needs at least one lag");
    blsacd::validate(generator);
}

Eigen::VectorXd ParamVector::to_vector() const {
    const std::size_t n = 5 + margin1.alpha.size() + margin1.beta.size() + margin2.alpha.size() +
                          margin2.beta.size();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    Eigen::Index k = 0;
    v[k++] = sigma1;
    v[k++] = sigma2;
    v[k++] = rho;
    for (const MarginDynamics* m : {&margin1, &margin2}) {
        v[k++] = m->omega;
        for (double a : m->alpha) v[k++] = a;
        for (double b : m->beta) v[k++] = b;
    }
    return v;
}

ParamVector ParamVector::from_vector(const ModelSpec& spec, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != spec.num_params()) {
        throw DomainError("parameter vector length does not match the lag orders");
    }
    ParamVector theta;
    Eigen::Index k = 0;
    theta.sigma1 = v[k++];
    theta.sigma2 = v[k++];
    theta.rho = v[k++];
    for (int i = 0; i < 2; ++i) {
        MarginDynamics& m = i == 0 ? theta.margin1 : theta.margin2;
        m.omega = v[k++];
        m.alpha.resize(static_cast<std::size_t>(spec.p(i)));
        m.beta.resize(static_cast<std::size_t>(spec.q(i)));
        for (double& a : m.alpha) a = v[k++];
        for (double& b : m.beta) b = v[k++];
    }
    return theta;
}

std::vector<std::string> ParamVector::names(const ModelSpec& spec) {
    std::vector<std::string> out{"sigma1", "sigma2", "rho"};
    for (int i = 0; i < 2; ++i) {
        const std::string idx = std::to_string(i + 1);
        out.push_back("omega" + idx);
        for (int j = 1; j <= spec.p(i); ++j) out.push_back("alpha" + idx + std::to_string(j));
        for (int j = 1; j <= spec.q(i); ++j) out.push_back("beta" + idx + std::to_string(j));
    }
    return out;
}

void ParamVector::validate(const ModelSpec& spec) const {
    if (margin1.alpha.size() != static_cast<std::size_t>(spec.p1) ||
        margin1.beta.size() != static_cast<std::size_t>(spec.q1) ||
        margin2.alpha.size() != static_cast<std::size_t>(spec.p2) ||
        margin2.beta.size() != static_cast<std::size_t>(spec.q2)) {
        throw DomainError("parameter vector does not match the lag orders");
    }
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw DomainError("sigma must be positive");
    if (!(std::abs(rho) < 1.0)) throw DomainError("rho must lie in (-1, 1)");
    if (!to_vector().allFinite()) throw DomainError("parameters must be finite");
}

void BiSeries::validate() const {
    if (y1.empty()) throw DataError("series is empty");
    if (y1.size() != y2.size()) throw DataError("series margins differ in length");
    if (!timestamps.empty() && timestamps.size() != y1.size()) {
        throw DataError("timestamps differ in length from the series");
    }
    for (std::size_t t = 0; t < y1.size(); ++t) {
        if (!(y1[t] > 0.0) || !(y2[t] > 0.0) || !std::isfinite(y1[t]) || !std::isfinite(y2[t])) {
            throw DataError("series entries must be finite and strictly positive (t=" +
                            std::to_string(t + 1) + ")");
        }
    }
}

BiSeries BiSeries::slice(std::size_t begin, std::size_t end) const {
    BiSeries out;
    end = std::min(end, size());
    out.y1.assign(y1.begin() + static_cast<std::ptrdiff_t>(begin), y1.begin() + static_cast<std::ptrdiff_t>(end));
    out.y2.assign(y2.begin() + static_cast<std::ptrdiff_t>(begin), y2.begin() + static_cast<std::ptrdiff_t>(end));
    if (!timestamps.empty()) {
        out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                              timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

std::string_view gradient_mode_token(GradientMode mode) {
    return mode == GradientMode::PaperLiteral ? "paper_literal" : "exact_recursive";
}

GradientMode parse_gradient_mode(std::string_view token) {
    if (token == "paper_literal" || token == "literal") return GradientMode::PaperLiteral;
    if (token == "exact_recursive" || token == "exact") return GradientMode::ExactRecursive;
    throw DomainError("unknown gradient mode '" + std::string(token) + "'");
}

MedianPaths recurse_medians(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                            const LikelihoodOptions& opts) {
    spec.validate();
    theta.validate(spec);
    MedianPaths out;
    for (int i = 0; i < 2; ++i) {
        const auto path = run_margin(theta.margin(i), i == 0 ? series.y1 : series.y2,
                                     i == 0 ? opts.presample_log_eta1 : opts.presample_log_eta2,
                                     EvalOrder::Value, GradientMode::PaperLiteral);
        auto& eta = i == 0 ? out.eta1 : out.eta2;
        eta.resize(path.log_eta.size());
        std::transform(path.log_eta.begin(), path.log_eta.end(), eta.begin(),
                       [](double le) { return std::exp(le); });
    }
    return out;
}

double quad_form(const ParamVector& theta, double y1, double y2, double eta1, double eta2) {
    const double w1 = (std::log(y1) - std::log(eta1)) / theta.sigma1;
    const double w2 = (std::log(y2) - std::log(eta2)) / theta.sigma2;
    const double q = (w1 * w1 - 2.0 * theta.rho * w1 * w2 + w2 * w2) / (1.0 - theta.rho * theta.rho);
    return std::max(q, 0.0);
}

LikelihoodEval evaluate(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                        EvalOrder order, GradientMode mode, const LikelihoodOptions& opts) {
    spec.validate();
    theta.validate(spec);
    series.validate();
    const std::size_t n_obs = series.size();
    if (opts.burn_in >= n_obs) throw DomainError("burn-in leaves no likelihood terms");

    const MarginPath paths[2] = {
        run_margin(theta.margin1, series.y1, opts.presample_log_eta1, order, mode),
        run_margin(theta.margin2, series.y2, opts.presample_log_eta2, order, mode),
    };

    const GeneratorSpec& gen = spec.generator;
    const double rho = theta.rho;
    const double d = 1.0 - rho * rho;
    const double sig[2] = {theta.sigma1, theta.sigma2};
    const std::size_t off[2] = {spec.margin_offset(0), spec.margin_offset(1)};
    const std::size_t np = spec.num_params();
    const Eigen::Index npi = static_cast<Eigen::Index>(np);
    const double n_terms = static_cast<double>(n_obs - opts.burn_in);

    LikelihoodEval out;
    const bool want_grad = order != EvalOrder::Value;
    const bool want_hess = order == EvalOrder::Hessian;
    if (want_grad) out.gradient = Eigen::VectorXd::Zero(npi);
    if (want_hess) out.hessian = Eigen::MatrixXd::Zero(npi, npi);

    // Jacobian of z = (w1, w2) with respect to theta, one row per margin.
    Eigen::VectorXd jw[2] = {Eigen::VectorXd::Zero(npi), Eigen::VectorXd::Zero(npi)};
    Eigen::VectorXd dq(npi);

    double sum_log_g = 0.0;
    double sum_log_y = 0.0;
    for (std::size_t t = opts.burn_in; t < n_obs; ++t) {
        const double ly[2] = {std::log(series.y1[t]), std::log(series.y2[t])};
        const double w[2] = {(ly[0] - paths[0].log_eta[t]) / sig[0], (ly[1] - paths[1].log_eta[t]) / sig[1]};
        const double q = (w[0] * w[0] - 2.0 * rho * w[0] * w[1] + w[1] * w[1]) / d;
        double q_eval = q;
        if (!(q_eval >= kQuadFormFloor)) {
            q_eval = kQuadFormFloor;
            ++out.floor_hits;
        }
        sum_log_g += log_g(gen, q_eval);
        sum_log_y += ly[0] + ly[1];
        if (!want_grad) continue;

        const double hq = h(gen, q_eval);
        // partials of q in (w1, w2, rho)
        const double qw[2] = {2.0 * (w[0] - rho * w[1]) / d, 2.0 * (w[1] - rho * w[0]) / d};
        const double qr = 2.0 * (rho * q - w[0] * w[1]) / d;

        for (int i = 0; i < 2; ++i) {
            jw[i].setZero();
            jw[i][i] = -w[i] / sig[i];
            const std::size_t m = static_cast<std::size_t>(paths[i].m);
            const double* dl = &paths[i].d1[t * m];
            for (std::size_t k = 0; k < m; ++k) {
                jw[i][static_cast<Eigen::Index>(off[i] + k)] = -dl[k] / sig[i];
            }
        }
        dq = qw[0] * jw[0] + qw[1] * jw[1];
        dq[2] += qr;
        out.gradient.noalias() += hq * dq;
        if (!want_hess) continue;

        const double hpq = h_prime(gen, q_eval);
        // second partials of q in (w1, w2, rho)
        const double q11 = 2.0 / d;
        const double q12 = -2.0 * rho / d;
        const double q1r = (-2.0 * w[1] + 2.0 * rho * qw[0]) / d;
        const double q2r = (-2.0 * w[0] + 2.0 * rho * qw[1]) / d;
        const double qrr = (2.0 * q + 4.0 * rho * qr) / d;

        Eigen::MatrixXd& hm = out.hessian;
        hm.noalias() += hpq * dq * dq.transpose();
        hm.noalias() += (hq * q11) * (jw[0] * jw[0].transpose() + jw[1] * jw[1].transpose());
        hm.noalias() += (hq * q12) * (jw[0] * jw[1].transpose() + jw[1] * jw[0].transpose());
        for (Eigen::Index k = 0; k < npi; ++k) {
            const double c = hq * (q1r * jw[0][k] + q2r * jw[1][k]);
            hm(2, k) += c;
            hm(k, 2) += c;
        }
        hm(2, 2) += hq * qrr;

        // second derivatives of w_i
        for (int i = 0; i < 2; ++i) {
            const double coef = hq * qw[i];
            const Eigen::Index si = i;
            const std::size_t m = static_cast<std::size_t>(paths[i].m);
            const double* dl = &paths[i].d1[t * m];
            hm(si, si) += coef * 2.0 * w[i] / (sig[i] * sig[i]);
            for (std::size_t k = 0; k < m; ++k) {
                const Eigen::Index gk = static_cast<Eigen::Index>(off[i] + k);
                const double c = coef * dl[k] / (sig[i] * sig[i]);
                hm(si, gk) += c;
                hm(gk, si) += c;
            }
            if (paths[i].d2.empty()) continue;
            const double* d2l = &paths[i].d2[t * m * m];
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = 0; b < m; ++b) {
                    hm(static_cast<Eigen::Index>(off[i] + a), static_cast<Eigen::Index>(off[i] + b)) -=
                        coef * d2l[a * m + b] / sig[i];
                }
            }
        }
    }

    out.value = -n_terms * (std::log(sig[0]) + std::log(sig[1])) - 0.5 * n_terms * std::log(d) + sum_log_g;
    if (opts.include_constant) out.value -= sum_log_y + n_terms * std::log(z_const(gen));
    if (want_grad) {
        out.gradient[0] -= n_terms / sig[0];
        out.gradient[1] -= n_terms / sig[1];
        out.gradient[2] += rho * n_terms / d;
    }
    if (want_hess) {
        out.hessian(0, 0) += n_terms / (sig[0] * sig[0]);
        out.hessian(1, 1) += n_terms / (sig[1] * sig[1]);
        out.hessian(2, 2) += n_terms * (1.0 + rho * rho) / (d * d);
        // exact symmetry
        const Eigen::MatrixXd upper = out.hessian.triangularView<Eigen::Upper>();
        out.hessian = upper.selfadjointView<Eigen::Upper>();
    }
    return out;
}

double loglik(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
              const LikelihoodOptions& opts) {
    return evaluate(spec, theta, series, EvalOrder::Value, GradientMode::PaperLiteral, opts).value;
}

Eigen::VectorXd score(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                      GradientMode mode, const LikelihoodOptions& opts) {
    return evaluate(spec, theta, series, EvalOrder::Gradient, mode, opts).gradient;
}

Eigen::MatrixXd hessian(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                        GradientMode mode, const LikelihoodOptions& opts) {
    return evaluate(spec, theta, series, EvalOrder::Hessian, mode, opts).hessian;
}

}  // namespace blsacd
