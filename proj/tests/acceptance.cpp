// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "blsacd/data.hpp"
#include "blsacd/diagnostics.hpp"
#include "blsacd/errors.hpp"
#include "blsacd/estimate.hpp"
#include "blsacd/simulate.hpp"
#include "blsacd/stats.hpp"
#include "test_support.hpp"

using namespace blsacd;
using namespace testsupport;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

GeneratorSpec family_spec(Family f) {
    switch (f) {
        case Family::LogStudentT:
        case Family::LogHyperbolic:
        case Family::LogSlash:
            return {f, 4.0};
        case Family::LogPowerExponential:
            return {f, 0.5};
        default:
            return {f, std::nullopt};
    }
}

ModelSpec spec11(GeneratorSpec gen = GeneratorSpec::lognormal()) {
    ModelSpec s;
    s.generator = gen;
    return s;
}

// Heavy-tailed fixture: one large draw of y/eta feeds log(eta) linearly, so
// the sigma = 1 design overflows the recursion.
ParamVector tail_truth(double rho) {
    ParamVector th = paper_truth(rho);
    th.sigma1 = th.sigma2 = 0.15;
    th.margin1.beta = {0.05};
    th.margin2.beta = {0.05};
    return th;
}

// Next substream whose path stays finite; overflowing paths are counted.
BiSeries simulate_finite(const ModelSpec& spec, const ParamVector& th, std::size_t n, std::uint64_t seed,
                         std::uint64_t stream, std::uint64_t& next, int& skipped) {
    for (;; ++next) {
        Rng rng = Rng::substream(seed, stream, next);
        try {
            BiSeries s = simulate_series(spec, th, n, rng);
            ++next;
            return s;
        } catch (const DivergenceError&) {
            ++skipped;
        }
    }
}

Outcome normalizers() {
    double worst = 0.0;
    for (Family f : kAllFamilies) {
        const GeneratorSpec g = family_spec(f);
        worst = std::max(worst, std::abs(z_const_numeric(g) - z_const(g)) / z_const(g));
    }
    return {worst <= 1e-6, "max rel error " + num(worst)};
}

Outcome derivatives() {
    std::mt19937_64 rng(515);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double g_exact = 0, h_exact = 0, g_lit = 0, h_lit = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const ModelSpec spec = spec11(inst % 2 ? GeneratorSpec{Family::LogStudentT, 5.0} : GeneratorSpec::lognormal());
        ParamVector th;
        th.sigma1 = 0.5 + u(rng);
        th.sigma2 = 0.5 + u(rng);
        th.rho = -0.8 + 1.6 * u(rng);
        th.margin1 = {0.3 * u(rng), {0.3 + 0.5 * u(rng)}, {0.02 + 0.2 * u(rng)}};
        th.margin2 = {0.3 * u(rng), {0.3 + 0.5 * u(rng)}, {0.02 + 0.2 * u(rng)}};
        const BiSeries s = gaussian_series(spec, th, 50, unsigned(1000 + inst));
        const Eigen::VectorXd x = th.to_vector();

        const auto ll = [&](const Eigen::VectorXd& v) { return loglik(spec, ParamVector::from_vector(spec, v), s); };
        const auto sc = [&](const Eigen::VectorXd& v) {
            return score(spec, ParamVector::from_vector(spec, v), s, GradientMode::ExactRecursive);
        };
        const LikelihoodEval ex = evaluate(spec, th, s, EvalOrder::Hessian, GradientMode::ExactRecursive);
        g_exact = std::max(g_exact, max_rel_error(ex.gradient, fd_gradient(ll, x, 1e-6), 1.0));
        h_exact = std::max(h_exact, max_rel_error(ex.hessian, fd_jacobian(sc, x, 1e-5), 1.0));

        const auto frozen = [&](const Eigen::VectorXd& v) {
            return frozen_loglik(spec, th, ParamVector::from_vector(spec, v), s);
        };
        const LikelihoodEval lit = evaluate(spec, th, s, EvalOrder::Hessian, GradientMode::PaperLiteral);
        g_lit = std::max(g_lit, max_rel_error(lit.gradient, fd_gradient(frozen, x, 1e-6), 1.0));
        h_lit = std::max(h_lit, max_rel_error(lit.hessian, fd_hessian(frozen, x, 1e-4), 1.0));
    }
    const bool pass = g_exact <= 1e-5 && h_exact <= 1e-4 && g_lit <= 1e-5 && h_lit <= 1e-4;
    return {pass, "exact score " + num(g_exact) + ", exact Hessian " + num(h_exact) + ", literal score " +
                      num(g_lit) + ", literal Hessian " + num(h_lit)};
}

Outcome residual_law() {
    std::string detail;
    bool pass = true;
    int skipped = 0;
    for (Family f : kAllFamilies) {
        const ModelSpec spec = spec11(family_spec(f));
        const ParamVector th = f == Family::LogNormal ? paper_truth(0.5) : tail_truth(0.5);
        std::uint64_t next = 0;
        const BiSeries s = simulate_finite(spec, th, 5000, 31, static_cast<std::uint64_t>(f), next, skipped);
        const ResidualSeries r = residuals(spec, th, s);
        double p = ks_test(r).p_value;
        if (f == Family::LogNormal) {
            const double d = stats::ks_statistic(r.re, [](double x) { return 1.0 - std::exp(-x / 2.0); });
            p = stats::ks_pvalue(d, r.re.size());
        }
        pass &= p >= 0.01;
        detail += std::string(detail.empty() ? "" : ", ") + std::string(family_token(f)) + " p=" + num(p, 3);
    }
    return {pass, detail + "; overflowing paths skipped " + std::to_string(skipped)};
}

Outcome monte_carlo() {
    McDesign d = McDesign::paper_defaults();
    d.T_grid = {500, 2000};
    d.rho_grid = {0.25, 0.75};
    d.replications = 200;
    d.seed = 2024;
    d.threads = 0;
    McReport rep;
    try {
        rep = run_mc_study(d);
    } catch (const std::exception& e) {
        return {false, std::string("study failed: ") + e.what()};
    }
    double worst_bias = 0.0;
    bool rmse_down = true;
    bool resid = true;
    int dropped = 0;
    std::string resid_detail;
    for (double rho : d.rho_grid) {
        const McCell& small = rep.cell(rho, 500);
        const McCell& big = rep.cell(rho, 2000);
        for (std::size_t k = 0; k < big.params.size(); ++k) {
            worst_bias = std::max(worst_bias, std::abs(big.params[k].bias));
            rmse_down &= big.params[k].rmse < small.params[k].rmse;
        }
        for (const McCell* c : {&small, &big}) {
            const ResidualSummary& r = c->residuals;
            dropped += c->failed;
            resid &= std::abs(r.mean - 2) <= 0.15 && std::abs(r.sd - 2) <= 0.10 && std::abs(r.skewness - 2) <= 0.20 &&
                     std::abs(r.kurtosis - 9) <= 1.2;
            resid_detail += " [rho " + num(rho, 2) + " T " + std::to_string(c->T) + ": " + num(r.mean) + " " +
                            num(r.sd) + " " + num(r.skewness) + " " + num(r.kurtosis) + "]";
        }
    }
    const bool pass = worst_bias <= 0.02 && rmse_down && resid;
    return {pass, "(a) max |bias| at T=2000 " + num(worst_bias) + "; (b) RMSE decreasing " +
                      (rmse_down ? "yes" : "no") + "; (c) residual mean/sd/skew/kurt" + resid_detail + "; dropped " +
                      std::to_string(dropped)};
}

Outcome info_parity() {
    const InfoCriteria ic = info_criteria(-2503.3361, 9, 1708);
    const double d = std::max({std::abs(ic.aic - 5024.6721), std::abs(ic.bic - 5073.6598), std::abs(ic.caic - 5024.7781)});
    const InfoCriteria un = info_criteria(-2503.33605, 9, 1708);
    const double du =
        std::max({std::abs(un.aic - 5024.6721), std::abs(un.bic - 5073.6598), std::abs(un.caic - 5024.7781)});
    char buf[160];
    std::snprintf(buf, sizeof buf, "(%.4f, %.4f, %.4f), max diff %.1e; unrounded loglik diff %.1e", ic.aic, ic.bic,
                  ic.caic, d, du);
    return {d <= 1.5e-4 && du <= 5e-5, buf};
}

Outcome prediction() {
    const ModelSpec spec = spec11();
    double c1 = 0, c2 = 0;
    const int seeds = 20;
    for (int k = 0; k < seeds; ++k) {
        Rng rng = Rng::substream(606, 0, static_cast<std::uint64_t>(k));
        const BiSeries s = simulate_series(spec, paper_truth(0.5), 1708, rng);
        const std::size_t cut = split_point(s.size(), 2.0 / 3.0);
        const BiSeries in = s.slice(0, cut);
        const BiSeries out = s.slice(cut, s.size());
        const FitResult f = fit(spec, in);
        const PredictionBand b = predict_intervals(spec, f.theta_hat, in, out, 0.95);
        c1 += b.coverage1 / seeds;
        c2 += b.coverage2 / seeds;
    }
    const bool pass = c1 >= 0.93 && c1 <= 0.98 && c2 >= 0.93 && c2 <= 0.98;
    return {pass, "coverage " + num(100 * c1) + "% / " + num(100 * c2) + "%"};
}

Outcome sampler() {
    double worst = 0.0;
    const ParamVector th = [] {
        ParamVector t;
        t.rho = 0.6;
        return t;
    }();
    for (Family f : kAllFamilies) {
        const GeneratorSpec g = family_spec(f);
        Rng rng = Rng::substream(707, static_cast<std::uint64_t>(f), 0);
        for (int i = 0; i < 1'000'000; ++i) {
            const InnovationDraw d = sample_innovation_pair(g, th.rho, rng);
            const double q = quad_form(th, std::exp(d.w1), std::exp(d.w2), 1.0, 1.0);
            worst = std::max(worst, std::abs(q - d.r2) / std::max(1.0, d.r2));
        }
    }
    return {worst <= 1e-12, "max error " + num(worst)};
}

Outcome ingestion(const std::string& data_dir) {
    std::mt19937_64 rng(808);
    std::uniform_int_distribution<std::int64_t> gap(0, 5'000'000'000LL);
    std::bernoulli_distribution same(0.2), change(0.3);
    int tapes = 0;
    bool exact = true;
    for (int rep = 0; rep < 200; ++rep) {
        TradeTape t;
        std::int64_t now = 0;
        double ask = 20.05;
        for (int k = 0; k < 1000; ++k) {
            now += same(rng) ? 0 : gap(rng) + 1;
            if (change(rng)) ask = 20.01 + 0.01 * static_cast<double>(rng() % 7);
            t.records.push_back({now, 20.0, ask});
        }
        const PairSeries p = build_pairs(t);
        std::int64_t span = 0;
        for (std::int64_t d : p.duration_ns) span += d;
        exact &= span == p.end_ns.back() - p.first_change_ns;
        double secs = 0.0;
        for (double y : p.series.y1) secs += y;
        exact &= std::abs(secs - 1e-9 * static_cast<double>(span)) <= 1e-6 * std::max(1.0, secs);
        ++tapes;
    }
    const TradeTape golden = read_tape_file(data_dir + "/golden_tape.csv");
    const PairSeries gp = build_pairs(golden);
    std::ostringstream os;
    write_pairs_csv(gp, diurnal_adjust(gp.series).adjusted, os);
    std::ifstream in(data_dir + "/golden_pairs.csv", std::ios::binary);
    std::ostringstream expected;
    expected << in.rdbuf();
    const bool golden_ok = os.str() == expected.str();
    return {exact && golden_ok, std::to_string(tapes) + " tapes " + (exact ? "exact" : "NOT exact") + ", golden " +
                                    (golden_ok ? "identical" : "differs")};
}

Outcome misfit() {
    const GeneratorSpec t3 = GeneratorSpec::with_nu(Family::LogStudentT, 3.0);
    int bent = 0, ks_ok = 0, skipped = 0, extreme = 0;
    std::vector<double> shares;
    const int seeds = 50;
    std::uint64_t next = 0;
    for (int k = 0; k < seeds; ++k) {
        const BiSeries s = simulate_finite(spec11(t3), tail_truth(0.5), 2000, 909, 0, next, skipped);
        const FitResult ln = fit(spec11(), s);
        const auto pts = qq_points(residuals(spec11(), ln.theta_hat, s));
        bent += qq_upper_tail_deviation(pts);
        shares.push_back(qq_upper_tail_share(pts));
        // The 20 largest points (top 1%).
        int above = 0;
        for (std::size_t i = pts.size() - 20; i < pts.size(); ++i) above += pts[i].empirical > pts[i].theoretical;
        extreme += above >= 18;
        const FitResult tt = fit(spec11(t3), s);
        ks_ok += ks_test(residuals(spec11(t3), tt.theta_hat, s)).p_value >= 0.05;
    }
    const bool pass = bent >= 40 && ks_ok >= 40;
    return {pass, "log-normal fit bends upward in " + std::to_string(bent) + "/50 (median top-decile share " +
                      num(stats::quantile_type8(shares, 0.5), 3) + ", limiting share 0.575; top 1% above in " +
                      std::to_string(extreme) + "/50), Student-t fit passes KS in " + std::to_string(ks_ok) +
                      "/50; overflowing paths skipped " + std::to_string(skipped)};
}

}  // namespace

// --known-failure N keeps a documented, unattainable criterion from setting
// the exit status; its FAIL line is still printed.
int main(int argc, char** argv) {
    std::vector<int> known;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--known-failure") known.push_back(std::atoi(argv[i + 1]));
    }
    const std::string data_dir = BLSACD_TEST_DATA_DIR;
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"normalizing constants", normalizers},
        {"score and Hessian against finite differences", derivatives},
        {"residual law KS at T=5000", residual_law},
        {"Monte Carlo replication", monte_carlo},
        {"information criteria", info_parity},
        {"prediction-interval coverage", prediction},
        {"sampler round trip", sampler},
        {"ingestion conservation", [&] { return ingestion(data_dir); }},
        {"misfit detection", misfit},
    };
    int failed = 0, blocking = 0;
    int n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool is_known = std::find(known.begin(), known.end(), n) != known.end();
        failed += !o.pass;
        blocking += !o.pass && !is_known;
        std::printf("criterion %d %s: %s (%s; %.1f s)%s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
                    !o.pass && is_known ? " [known failure]" : "");
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return blocking == 0 ? 0 : 1;
}
