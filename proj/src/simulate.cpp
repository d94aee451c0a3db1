#include "blsacd/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "blsacd/errors.hpp"
#include "blsacd/format.hpp"
#include "blsacd/parallel.hpp"
#include "blsacd/radial.hpp"
#include "blsacd/stats.hpp"

namespace blsacd {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct RepOutcome {
    bool ok = false;
    std::vector<double> theta;
    stats::Moments res;
    double res_sd = 0.0;
};

}  // namespace

Rng Rng::substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = seed;
    std::uint64_t mixed = splitmix64(s);
    s = mixed ^ a;
    mixed = splitmix64(s);
    s = mixed ^ b;
    return Rng(splitmix64(s));
}

InnovationDraw sample_innovation_pair(const GeneratorSpec& gen, double rho, Rng& rng) {
    if (!(std::abs(rho) < 1.0)) throw DomainError("rho must lie in (-1, 1)");
    const RadialLaw& law = radial_law(gen);
    InnovationDraw d;
    d.r2 = law.quantile(rng.uniform());
    const double r = std::sqrt(d.r2);
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const double z1 = r * std::cos(angle);
    const double z2 = r * std::sin(angle);
    d.w1 = z1;
    d.w2 = rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
    return d;
}

BiSeries simulate_series(const ModelSpec& spec, const ParamVector& theta, std::size_t n_obs, Rng& rng,
                         const LikelihoodOptions& presample, MedianPaths* paths) {
    spec.validate();
    theta.validate(spec);
    if (n_obs == 0) throw DomainError("series length must be positive");
    BiSeries s;
    s.y1.reserve(n_obs);
    s.y2.reserve(n_obs);
    std::vector<double> log_eta[2];
    std::vector<double> ratio[2];
    const double pre[2] = {presample.presample_log_eta1, presample.presample_log_eta2};
    for (std::size_t t = 0; t < n_obs; ++t) {
        const InnovationDraw d = sample_innovation_pair(spec.generator, theta.rho, rng);
        const double w[2] = {d.w1, d.w2};
        for (int i = 0; i < 2; ++i) {
            const MarginDynamics& m = theta.margin(i);
            double le = m.omega;
            for (int j = 1; j <= spec.p(i); ++j) {
                le += m.alpha[j - 1] * (t >= static_cast<std::size_t>(j) ? log_eta[i][t - j] : pre[i]);
            }
            for (int j = 1; j <= spec.q(i); ++j) {
                le += m.beta[j - 1] * (t >= static_cast<std::size_t>(j) ? ratio[i][t - j] : 1.0);
            }
            const double r = std::exp(theta.sigma(i) * w[i]);
            const double y = std::exp(le) * r;
            if (!std::isfinite(le) || std::abs(le) > 700.0 || !std::isfinite(y) || !(y > 0.0)) {
                throw DivergenceError("simulated series diverged", t + 1);
            }
            log_eta[i].push_back(le);
            ratio[i].push_back(r);
            (i == 0 ? s.y1 : s.y2).push_back(y);
        }
    }
    if (paths) {
        for (int i = 0; i < 2; ++i) {
            auto& eta = i == 0 ? paths->eta1 : paths->eta2;
            eta.resize(n_obs);
            for (std::size_t t = 0; t < n_obs; ++t) eta[t] = std::exp(log_eta[i][t]);
        }
    }
    return s;
}

McDesign McDesign::paper_defaults() {
    McDesign d;
    d.spec = ModelSpec{};
    d.theta_true.sigma1 = 1.0;
    d.theta_true.sigma2 = 1.0;
    d.theta_true.rho = 0.5;
    d.theta_true.margin1 = {0.2, {0.7}, {0.1}};
    d.theta_true.margin2 = {0.2, {0.7}, {0.1}};
    d.T_grid = {500, 1000, 2000};
    d.rho_grid = {0.10, 0.25, 0.50, 0.75, 0.90};
    d.replications = 1000;
    return d;
}

void McDesign::validate() const {
    spec.validate();
    if (replications < 1) throw DomainError("replications must be >= 1");
    if (T_grid.empty() || rho_grid.empty()) throw DomainError("design grids must be non-empty");
    for (std::size_t t : T_grid) {
        if (t < 2) throw DomainError("sample sizes must be >= 2");
    }
    for (double r : rho_grid) {
        ParamVector th = theta_true;
        th.rho = r;
        th.validate(spec);
    }
}

const McCell& McReport::cell(double rho, std::size_t n_obs) const {
    for (const McCell& c : cells) {
        if (c.rho == rho && c.T == n_obs) return c;
    }
    throw DomainError("no such Monte Carlo cell");
}

EstimatorStats summarize_estimates(const std::vector<double>& estimates, double truth) {
    const stats::Moments m = stats::moments(estimates);
    EstimatorStats s;
    s.mean = m.mean;
    s.bias = m.mean - truth;
    s.variance = m.variance;
    double mse = 0.0;
    for (double e : estimates) mse += (e - truth) * (e - truth);
    s.rmse = std::sqrt(mse / static_cast<double>(estimates.size()));
    s.skewness = m.skewness;
    s.kurtosis = m.kurtosis;
    return s;
}

McReport run_mc_study(const McDesign& design) {
    design.validate();
    McReport report;
    report.param_names = ParamVector::names(design.spec);
    {
        ParamVector th = design.theta_true;
        th.rho = design.rho_grid.front();
        const Eigen::VectorXd v = th.to_vector();
        report.truth_template.assign(v.data(), v.data() + v.size());
    }

    const std::size_t n_t = design.T_grid.size();
    const std::size_t n_cells = design.rho_grid.size() * n_t;
    const std::size_t reps = static_cast<std::size_t>(design.replications);
    std::vector<RepOutcome> outcomes(n_cells * reps);

    parallel_for(outcomes.size(), design.threads, [&](std::size_t idx) {
        const std::size_t cell = idx / reps;
        const std::size_t rep = idx % reps;
        ParamVector truth = design.theta_true;
        truth.rho = design.rho_grid[cell / n_t];
        const std::size_t n_obs = design.T_grid[cell % n_t];
        Rng rng = Rng::substream(design.seed, cell, rep);
        RepOutcome& out = outcomes[idx];
        try {
            const BiSeries s = simulate_series(design.spec, truth, n_obs, rng, design.fit.likelihood);
            FitOptions fo = design.fit;
            fo.seed = design.seed ^ (idx * 0x9e3779b97f4a7c15ULL);
            const FitResult fr = fit(design.spec, s, fo);
            if (!fr.converged) return;
            const Eigen::VectorXd v = fr.theta_hat.to_vector();
            out.theta.assign(v.data(), v.data() + v.size());
            const MedianPaths paths = recurse_medians(design.spec, fr.theta_hat, s, design.fit.likelihood);
            std::vector<double> re(s.size());
            for (std::size_t t = 0; t < s.size(); ++t) {
                re[t] = quad_form(fr.theta_hat, s.y1[t], s.y2[t], paths.eta1[t], paths.eta2[t]);
            }
            out.res = stats::moments(re);
            out.res_sd = stats::sample_sd(re);
            out.ok = true;
        } catch (const DivergenceError&) {
        } catch (const NumericError&) {
        }
    });

    const std::size_t k = design.spec.num_params();
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        McCell c;
        c.rho = design.rho_grid[cell / n_t];
        c.T = design.T_grid[cell % n_t];
        c.attempted = design.replications;
        ParamVector truth = design.theta_true;
        truth.rho = c.rho;
        const Eigen::VectorXd tv = truth.to_vector();
        std::vector<std::vector<double>> est(k);
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const RepOutcome& o = outcomes[cell * reps + rep];
            report.fits.push_back({c.rho, c.T, static_cast<int>(rep), o.ok, o.theta});
            if (!o.ok) continue;
            ++c.used;
            for (std::size_t j = 0; j < k; ++j) est[j].push_back(o.theta[j]);
            c.residuals.mean += o.res.mean;
            c.residuals.sd += o.res_sd;
            c.residuals.skewness += o.res.skewness;
            c.residuals.kurtosis += o.res.kurtosis;
        }
        c.failed = c.attempted - c.used;
        if (c.failed * 5 > c.attempted) {
            std::ostringstream os;
            os << "Monte Carlo cell rho=" << c.rho << " T=" << c.T << ": " << c.failed << " of " << c.attempted
               << " replications failed";
            throw NumericError(os.str());
        }
        if (c.used > 0) {
            const double u = c.used;
            c.residuals.mean /= u;
            c.residuals.sd /= u;
            c.residuals.skewness /= u;
            c.residuals.kurtosis /= u;
            for (std::size_t j = 0; j < k; ++j) {
                c.params.push_back(summarize_estimates(est[j], tv[static_cast<Eigen::Index>(j)]));
            }
        }
        report.cells.push_back(std::move(c));
    }
    return report;
}

void write_mc_fits_csv(const McReport& report, std::ostream& os) {
    os << "rho,T,replication,converged";
    for (const auto& n : report.param_names) os << ',' << n;
    os << '\n';
    for (const McReplication& f : report.fits) {
        os << fmt(f.rho) << ',' << f.T << ',' << f.replication << ',' << (f.converged ? 1 : 0);
        for (std::size_t j = 0; j < report.param_names.size(); ++j) {
            os << ',' << (f.converged ? fmt(f.theta[j]) : std::string("NA"));
        }
        os << '\n';
    }
}

void write_mc_csv(const McReport& report, std::ostream& os) {
    os << "rho,T,parameter,statistic,value\n";
    for (const McCell& c : report.cells) {
        const auto row = [&](const std::string& param, const char* stat, double v) {
            os << fmt(c.rho) << ',' << c.T << ',' << param << ',' << stat << ',' << fmt(v) << '\n';
        };
        row("replications", "attempted", c.attempted);
        row("replications", "used", c.used);
        row("replications", "failed", c.failed);
        for (std::size_t j = 0; j < c.params.size(); ++j) {
            const EstimatorStats& s = c.params[j];
            const std::string& p = report.param_names[j];
            row(p, "mean", s.mean);
            row(p, "bias", s.bias);
            row(p, "rmse", s.rmse);
            row(p, "skewness", s.skewness);
            row(p, "kurtosis", s.kurtosis);
        }
        row("Re", "mean", c.residuals.mean);
        row("Re", "sd", c.residuals.sd);
        row("Re", "skewness", c.residuals.skewness);
        row("Re", "kurtosis", c.residuals.kurtosis);
    }
}

std::string format_mc_tables(const McReport& report) {
    std::vector<double> rhos;
    std::vector<std::size_t> ts;
    for (const McCell& c : report.cells) {
        if (std::find(rhos.begin(), rhos.end(), c.rho) == rhos.end()) rhos.push_back(c.rho);
        if (std::find(ts.begin(), ts.end(), c.T) == ts.end()) ts.push_back(c.T);
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    const char* titles[] = {"Empirical means", "Empirical biases", "Empirical RMSEs", "Empirical skewness",
                            "Empirical kurtosis"};
    for (int stat = 0; stat < 5; ++stat) {
        os << titles[stat] << "\n";
        os << std::setw(6) << "rho";
        for (const std::string& p : report.param_names) {
            for (std::size_t t : ts) os << std::setw(12) << (p + "/" + std::to_string(t));
        }
        os << "\n";
        for (double r : rhos) {
            os << std::setw(6) << std::setprecision(2) << r << std::setprecision(4);
            for (std::size_t j = 0; j < report.param_names.size(); ++j) {
                for (std::size_t t : ts) {
                    const McCell& c = report.cell(r, t);
                    if (c.params.empty()) {
                        os << std::setw(12) << "NA";
                        continue;
                    }
                    const EstimatorStats& s = c.params[j];
                    const double v = stat == 0 ? s.mean : stat == 1 ? s.bias : stat == 2 ? s.rmse
                                   : stat == 3 ? s.skewness : s.kurtosis;
                    os << std::setw(12) << v;
                }
            }
            os << "\n";
        }
        os << "\n";
    }
    os << "Residual summary (mean, sd, skewness, kurtosis)\n";
    for (const McCell& c : report.cells) {
        os << "rho=" << std::setprecision(2) << c.rho << std::setprecision(4) << " T=" << c.T << ": "
           << c.residuals.mean << ' ' << c.residuals.sd << ' ' << c.residuals.skewness << ' '
           << c.residuals.kurtosis << "  (used " << c.used << "/" << c.attempted << ")\n";
    }
    return os.str();
}

}  // namespace blsacd
