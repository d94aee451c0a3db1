#include "blsacd/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "blsacd/errors.hpp"
#include "blsacd/optimize.hpp"

namespace blsacd {

namespace {

constexpr double kSigmaMin = 1e-6;
constexpr double kRhoMax = 1.0 - 1e-6;

struct LocalFit {
    ParamVector theta;
    double loglik = -std::numeric_limits<double>::infinity();
    double grad_inf = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool at_boundary = false;
};

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    double m = v[n / 2];
    if (n % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2)));
    }
    return m;
}

Eigen::VectorXd to_unconstrained(const ParamVector& theta) {
    Eigen::VectorXd u = theta.to_vector();
    u[0] = std::log(theta.sigma1);
    u[1] = std::log(theta.sigma2);
    u[2] = std::atanh(theta.rho);
    return u;
}

ParamVector from_unconstrained(const ModelSpec& spec, Eigen::VectorXd u) {
    u[0] = std::exp(u[0]);
    u[1] = std::exp(u[1]);
    u[2] = std::tanh(u[2]);
    return ParamVector::from_vector(spec, u);
}

bool feasible(const ParamVector& th) {
    return th.sigma1 >= kSigmaMin && th.sigma2 >= kSigmaMin && std::abs(th.rho) <= kRhoMax;
}

// One BFGS run in the unconstrained parameterization followed by Newton
// steps on the exact Hessian in the natural one.
LocalFit climb(const ModelSpec& spec, const BiSeries& series, const ParamVector& start, const FitOptions& opts) {
    const double scale = 1.0 / static_cast<double>(series.size() - opts.likelihood.burn_in);
    const SmoothObjective objective = [&](const Eigen::VectorXd& u, double& value, Eigen::VectorXd* grad) {
        try {
            const ParamVector th = from_unconstrained(spec, u);
            const LikelihoodEval ev = evaluate(spec, th, series, grad ? EvalOrder::Gradient : EvalOrder::Value,
                                               GradientMode::ExactRecursive, opts.likelihood);
            value = -ev.value * scale;
            if (grad) {
                *grad = -ev.gradient * scale;
                (*grad)[0] *= th.sigma1;
                (*grad)[1] *= th.sigma2;
                (*grad)[2] *= 1.0 - th.rho * th.rho;
            }
            return std::isfinite(value);
        } catch (const DivergenceError&) {
            return false;
        } catch (const DomainError&) {
            return false;
        } catch (const NumericError&) {
            return false;
        }
    };

    const Eigen::Index n = static_cast<Eigen::Index>(spec.num_params());
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    lo[0] = lo[1] = std::log(kSigmaMin);
    lo[2] = -std::atanh(kRhoMax);
    hi[2] = std::atanh(kRhoMax);

    BfgsOptions bo;
    bo.max_iter = opts.max_iter;
    bo.grad_tol = 1e-3 * opts.grad_tol * scale;
    const BfgsResult br = minimize_bfgs(objective, to_unconstrained(start), lo, hi, bo);

    LocalFit out;
    out.theta = from_unconstrained(spec, br.x);
    out.iterations = br.iterations;
    out.at_boundary = br.at_bound;
    LikelihoodEval ev = evaluate(spec, out.theta, series, EvalOrder::Hessian, GradientMode::ExactRecursive,
                                 opts.likelihood);
    out.loglik = ev.value;
    out.grad_inf = ev.gradient.cwiseAbs().maxCoeff();
    if (out.at_boundary) return out;

    // Newton polish. After the gradient test passes, one more step is taken
    // when it still improves, so the final step is below step_tol.
    bool small_grad = out.grad_inf <= opts.grad_tol;
    for (int it = 0; it < 50; ++it) {
        Eigen::MatrixXd neg = -ev.hessian;
        Eigen::LLT<Eigen::MatrixXd> llt(neg);
        double shift = 0.0;
        while (llt.info() != Eigen::Success) {
            shift = shift == 0.0 ? 1e-8 * std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
            if (!std::isfinite(shift) || shift > 1e12) break;
            llt.compute(neg + shift * Eigen::MatrixXd::Identity(n, n));
        }
        if (llt.info() != Eigen::Success) break;
        const Eigen::VectorXd dir = llt.solve(ev.gradient);
        const Eigen::VectorXd x = out.theta.to_vector();
        bool accepted = false;
        double step = 1.0;
        LikelihoodEval trial;
        ParamVector cand;
        for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
            cand = ParamVector::from_vector(spec, x + step * dir);
            if (!feasible(cand)) continue;
            try {
                trial = evaluate(spec, cand, series, EvalOrder::Hessian, GradientMode::ExactRecursive, opts.likelihood);
            } catch (const std::exception&) {
                continue;
            }
            const double slack = 1e-13 * std::abs(out.loglik);
            if (std::isfinite(trial.value) && trial.value >= out.loglik - slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        const double step_inf = (step * dir).cwiseAbs().maxCoeff();
        const double new_grad = trial.gradient.cwiseAbs().maxCoeff();
        if (small_grad && new_grad > out.grad_inf) break;
        out.theta = cand;
        out.loglik = trial.value;
        out.grad_inf = new_grad;
        ev = std::move(trial);
        ++out.iterations;
        if (small_grad && step_inf <= opts.step_tol) break;
        small_grad = out.grad_inf <= opts.grad_tol;
    }
    out.converged = out.grad_inf <= opts.grad_tol;
    return out;
}

ParamVector jitter(const ModelSpec& spec, const ParamVector& base, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    ParamVector th = base;
    th.sigma1 *= std::exp(0.2 * nd(rng));
    th.sigma2 *= std::exp(0.2 * nd(rng));
    th.rho = std::clamp(th.rho + 0.1 * nd(rng), -0.95, 0.95);
    for (int i = 0; i < 2; ++i) {
        MarginDynamics& m = i == 0 ? th.margin1 : th.margin2;
        m.omega += 0.1 * nd(rng);
        for (double& a : m.alpha) a += 0.1 * nd(rng);
        for (double& b : m.beta) b += 0.02 * nd(rng);
    }
    (void)spec;
    return th;
}

void finish(FitResult& res, const BiSeries& series, const FitOptions& opts) {
    const std::size_t terms = series.size() - opts.likelihood.burn_in;
    const InfoCriteria ic = info_criteria(res.loglik_at_max, res.k, terms);
    res.aic = ic.aic;
    res.bic = ic.bic;
    res.caic = ic.caic;
    const std::string msg = "caic undefined: T <= k + 1";
    if (!ic.caic_defined && std::find(res.warnings.begin(), res.warnings.end(), msg) == res.warnings.end()) {
        res.warnings.push_back(msg);
    }
}

// Screens a few (alpha, beta) persistence levels around the moment start and
// keeps the one with the highest likelihood. Spiky data can make the default
// diverge while a smaller beta stays finite.
ParamVector screened_start(const ModelSpec& spec, const BiSeries& series, const LikelihoodOptions& lo) {
    const ParamVector base = default_start(spec, series);
    ParamVector best = base;
    double best_ll = -std::numeric_limits<double>::infinity();
    static const double alphas[] = {0.5, 0.8, 0.2, 0.95};
    static const double betas[] = {0.05, 0.1, 0.2, 0.01, 1e-3};
    for (double a : alphas) {
        for (double b : betas) {
            ParamVector th = base;
            for (int i = 0; i < 2; ++i) {
                MarginDynamics& m = i == 0 ? th.margin1 : th.margin2;
                const MarginDynamics& m0 = i == 0 ? base.margin1 : base.margin2;
                if (!m.alpha.empty()) m.alpha[0] = a;
                if (!m.beta.empty()) m.beta[0] = b;
                const double asum = std::accumulate(m.alpha.begin(), m.alpha.end(), 0.0);
                const double bsum = std::accumulate(m.beta.begin(), m.beta.end(), 0.0);
                const double a0 = std::accumulate(m0.alpha.begin(), m0.alpha.end(), 0.0);
                const double b0 = std::accumulate(m0.beta.begin(), m0.beta.end(), 0.0);
                const double med = (m0.omega + b0) / (1.0 - a0);
                m.omega = (1.0 - asum) * med - bsum;
            }
            try {
                const double ll = loglik(spec, th, series, lo);
                if (std::isfinite(ll) && ll > best_ll) {
                    best_ll = ll;
                    best = th;
                }
            } catch (const std::exception&) {
            }
        }
    }
    return best;
}

}  // namespace

InfoCriteria info_criteria(double loglik, int k, std::size_t n_obs) {
    if (n_obs == 0) throw DomainError("information criteria need T >= 1");
    if (k < 0) throw DomainError("parameter count must be nonnegative");
    InfoCriteria ic;
    const double kk = k;
    const double tt = static_cast<double>(n_obs);
    ic.aic = -2.0 * loglik + 2.0 * kk;
    ic.bic = -2.0 * loglik + kk * std::log(tt);
    if (tt <= kk + 1.0) {
        ic.caic = std::numeric_limits<double>::quiet_NaN();
        ic.caic_defined = false;
    } else {
        ic.caic = ic.aic + 2.0 * kk * (kk + 1.0) / (tt - kk - 1.0);
    }
    return ic;
}

std::string presample_description(const LikelihoodOptions& opts) {
    std::ostringstream os;
    os.precision(17);
    os << "log eta_i,t = " << opts.presample_log_eta1 << ", " << opts.presample_log_eta2
       << " and y/eta = 1 for t <= 0; burn_in = " << opts.burn_in;
    return os.str();
}

ParamVector default_start(const ModelSpec& spec, const BiSeries& series) {
    ParamVector th;
    const std::size_t n = series.size();
    std::vector<double> ly[2];
    double mean[2] = {0, 0};
    double sd[2] = {0, 0};
    double med[2] = {0, 0};
    for (int i = 0; i < 2; ++i) {
        const auto& y = i == 0 ? series.y1 : series.y2;
        ly[i].resize(n);
        std::transform(y.begin(), y.end(), ly[i].begin(), [](double v) { return std::log(v); });
        mean[i] = std::accumulate(ly[i].begin(), ly[i].end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : ly[i]) ss += (v - mean[i]) * (v - mean[i]);
        sd[i] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 1.0;
        med[i] = median_of(ly[i]);
    }
    double cov = 0.0;
    for (std::size_t t = 0; t < n; ++t) cov += (ly[0][t] - mean[0]) * (ly[1][t] - mean[1]);
    cov /= n > 1 ? static_cast<double>(n - 1) : 1.0;
    th.sigma1 = std::max(sd[0], 1e-3);
    th.sigma2 = std::max(sd[1], 1e-3);
    th.rho = sd[0] > 0 && sd[1] > 0 ? std::clamp(cov / (sd[0] * sd[1]), -0.95, 0.95) : 0.0;
    for (int i = 0; i < 2; ++i) {
        MarginDynamics& m = i == 0 ? th.margin1 : th.margin2;
        m.alpha.assign(static_cast<std::size_t>(spec.p(i)), 0.0);
        m.beta.assign(static_cast<std::size_t>(spec.q(i)), 0.0);
        if (!m.alpha.empty()) m.alpha[0] = 0.5;
        if (!m.beta.empty()) m.beta[0] = 0.05;
        // The ratio y/eta has median 1 under the model.
        const double asum = std::accumulate(m.alpha.begin(), m.alpha.end(), 0.0);
        const double bsum = std::accumulate(m.beta.begin(), m.beta.end(), 0.0);
        m.omega = (1.0 - asum) * med[i] - bsum;
    }
    return th;
}

Eigen::VectorXd standard_errors(const ModelSpec& spec, const ParamVector& theta_hat, const BiSeries& series,
                                GradientMode mode, const LikelihoodOptions& opts) {
    const auto try_invert = [](const Eigen::MatrixXd& neg, Eigen::VectorXd& se, Eigen::VectorXd& eig) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
        eig = es.eigenvalues();
        if (es.info() != Eigen::Success || !eig.allFinite()) return false;
        if (!(eig.minCoeff() > 1e-12 * std::max(1.0, eig.cwiseAbs().maxCoeff()))) return false;
        const Eigen::MatrixXd& v = es.eigenvectors();
        se = (v * eig.cwiseInverse().asDiagonal() * v.transpose()).diagonal().cwiseSqrt();
        return se.allFinite();
    };

    Eigen::VectorXd se;
    Eigen::VectorXd eig;
    const Eigen::MatrixXd hm = hessian(spec, theta_hat, series, mode, opts);
    if (hm.allFinite() && try_invert(-hm, se, eig)) return se;

    // Central differences of the exact score.
    const Eigen::VectorXd x = theta_hat.to_vector();
    const Eigen::Index n = x.size();
    Eigen::MatrixXd fd(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd a = x, b = x;
        a[j] += h;
        b[j] -= h;
        fd.col(j) = (score(spec, ParamVector::from_vector(spec, a), series, GradientMode::ExactRecursive, opts) -
                     score(spec, ParamVector::from_vector(spec, b), series, GradientMode::ExactRecursive, opts)) /
                    (2 * h);
    }
    const Eigen::MatrixXd sym = 0.5 * (fd + fd.transpose());
    if (try_invert(-sym, se, eig)) return se;
    std::ostringstream os;
    os << "observed information is not positive definite; eigenvalues of -H:";
    for (Eigen::Index i = 0; i < eig.size(); ++i) os << ' ' << eig[i];
    throw SingularHessian(os.str(), eig);
}

FitResult fit(const ModelSpec& spec, const BiSeries& series, const FitOptions& options) {
    spec.validate();
    series.validate();
    if (options.likelihood.burn_in + 2 > series.size()) throw DataError("series too short to fit");

    FitResult res;
    res.spec = spec;
    res.k = static_cast<int>(spec.num_params());
    res.n_obs = series.size();
    res.burn_in = options.likelihood.burn_in;
    res.gradient_mode = options.gradient_mode;
    res.presample_convention = presample_description(options.likelihood);
    if (spec.generator.extra) res.nu_hat = spec.generator.extra;
    if (series.size() < 10 * spec.num_params()) {
        res.warnings.push_back("under-identified: T = " + std::to_string(series.size()) + " < 10k = " +
                               std::to_string(10 * spec.num_params()));
    }

    const ParamVector start = options.start ? *options.start : screened_start(spec, series, options.likelihood);
    start.validate(spec);
    // Static medians: no feedback, so the recursion cannot diverge.
    ParamVector flat = start;
    for (int i = 0; i < 2; ++i) {
        MarginDynamics& m = i == 0 ? flat.margin1 : flat.margin2;
        const double asum = std::accumulate(m.alpha.begin(), m.alpha.end(), 0.0);
        const double bsum = std::accumulate(m.beta.begin(), m.beta.end(), 0.0);
        m.omega = (m.omega + bsum) / (1.0 - asum);
        std::fill(m.alpha.begin(), m.alpha.end(), 0.0);
        std::fill(m.beta.begin(), m.beta.end(), 0.0);
    }
    std::mt19937_64 rng(options.seed);
    LocalFit best;
    bool have = false;
    const int starts = std::max(1, options.starts);
    for (int s = 0; s < starts; ++s) {
        const ParamVector init = s == 0 ? start : s == 1 && !have ? flat : jitter(spec, have ? best.theta : start, rng);
        if (!feasible(init)) continue;
        LocalFit lf;
        try {
            lf = climb(spec, series, init, options);
        } catch (const NumericError&) {
            continue;
        } catch (const DivergenceError&) {
            continue;
        }
        ++res.starts_used;
        res.iterations += lf.iterations;
        const bool better = !have || (lf.converged && !best.converged) ||
                            (lf.converged == best.converged && lf.loglik > best.loglik);
        if (better) {
            best = lf;
            have = true;
        }
        if (best.converged) break;
    }
    if (!have) throw NumericError("no start produced a finite likelihood");

    res.theta_hat = best.theta;
    // Report the full log-likelihood, normalizer and Jacobian included, so
    // values compare across families and across nu.
    LikelihoodOptions full = options.likelihood;
    full.include_constant = true;
    const LikelihoodEval at_max =
        evaluate(spec, best.theta, series, EvalOrder::Value, GradientMode::PaperLiteral, full);
    res.loglik_at_max = at_max.value;
    res.grad_norm_at_max = best.grad_inf;
    res.converged = best.converged && !best.at_boundary;
    res.at_boundary = best.at_boundary;
    if (best.at_boundary) res.warnings.push_back("estimate on the parameter boundary");
    if (!res.converged) res.warnings.push_back("optimizer did not reach the gradient tolerance");
    res.floor_hits = at_max.floor_hits;

    const Eigen::Index n = static_cast<Eigen::Index>(spec.num_params());
    res.se = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    if (!res.at_boundary) {
        try {
            res.se = standard_errors(spec, res.theta_hat, series, options.gradient_mode, options.likelihood);
            res.se_available = true;
        } catch (const SingularHessian& e) {
            res.warnings.push_back(e.what());
        } catch (const std::exception& e) {
            res.warnings.push_back(std::string("standard errors unavailable: ") + e.what());
        }
    }
    finish(res, series, options);
    return res;
}

std::vector<double> default_nu_grid(Family family) {
    switch (family) {
        case Family::LogStudentT: return {1, 2, 4, 8, 16, 32, 64, 128};
        case Family::LogHyperbolic: return {1, 2, 4, 8, 16, 32, 48, 64};
        case Family::LogSlash: return {1.25, 1.5, 2, 3, 4, 6, 8, 16};
        case Family::LogPowerExponential: return {-0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1};
        default: throw DomainError("family has no extra parameter");
    }
}

double default_nu_tolerance(Family family) {
    return family == Family::LogPowerExponential ? 0.05 : 0.5;
}

FitResult fit_profile_nu(const ModelSpec& spec, const BiSeries& series, const std::vector<double>& nu_grid,
                         const FitOptions& options) {
    const Family fam = spec.generator.family;
    if (!family_has_extra(fam)) throw DomainError("family has no extra parameter to profile");
    if (nu_grid.empty()) throw DomainError("empty nu grid");
    std::vector<double> grid = nu_grid;
    for (double nu : grid) {
        if (!std::isfinite(nu) || !is_valid(GeneratorSpec{fam, nu})) {
            throw DomainError("nu grid value outside the family domain");
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    ModelSpec sp = spec;
    std::optional<ParamVector> warm = options.start;
    const auto fit_at = [&](double nu) -> std::optional<FitResult> {
        sp.generator = GeneratorSpec{fam, nu};
        FitOptions o = options;
        o.start = warm;
        try {
            FitResult r = fit(sp, series, o);
            if (std::isfinite(r.loglik_at_max)) warm = r.theta_hat;
            return r;
        } catch (const NumericError&) {
            return std::nullopt;
        }
    };

    if (grid.size() == 1) {
        auto r = fit_at(grid[0]);
        if (!r) throw NumericError("profile fit failed at the only grid point");
        r->profile.emplace_back(grid[0], r->loglik_at_max);
        return *r;
    }

    std::vector<std::pair<double, double>> profile;
    std::optional<FitResult> best;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto r = fit_at(grid[i]);
        const double ll = r ? r->loglik_at_max : -std::numeric_limits<double>::infinity();
        profile.emplace_back(grid[i], ll);
        if (r && (!best || ll > best->loglik_at_max)) {
            best = std::move(r);
            best_idx = i;
        }
    }
    if (!best) throw NumericError("profile fits failed at every grid point");

    // Golden-section refinement between the neighbours of the best grid point.
    double a = grid[best_idx == 0 ? 0 : best_idx - 1];
    double b = grid[std::min(best_idx + 1, grid.size() - 1)];
    const double tol = default_nu_tolerance(fam);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    warm = best->theta_hat;
    const auto probe = [&](double nu) {
        auto r = fit_at(nu);
        const double ll = r ? r->loglik_at_max : -std::numeric_limits<double>::infinity();
        profile.emplace_back(nu, ll);
        if (r && ll > best->loglik_at_max) best = std::move(r);
        return ll;
    };
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = probe(c);
    double fd = probe(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = probe(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = probe(d);
        }
    }

    FitResult res = std::move(*best);
    res.nu_hat = res.spec.generator.extra;
    std::sort(profile.begin(), profile.end());
    res.profile = std::move(profile);
    if (options.count_nu) ++res.k;
    finish(res, series, options);
    return res;
}

}  // namespace blsacd
