#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "blsacd/errors.hpp"
#include "blsacd/radial.hpp"
#include "blsacd/simulate.hpp"
#include "blsacd/stats.hpp"
#include "test_support.hpp"

using namespace blsacd;
using namespace testsupport;

namespace {

std::vector<GeneratorSpec> all_families() {
    return {GeneratorSpec::lognormal(),
            GeneratorSpec::with_nu(Family::LogStudentT, 4.0),
            GeneratorSpec::with_nu(Family::LogHyperbolic, 2.0),
            GeneratorSpec{Family::LogLaplace, std::nullopt},
            GeneratorSpec::with_nu(Family::LogSlash, 3.0),
            GeneratorSpec::with_nu(Family::LogPowerExponential, 0.5),
            GeneratorSpec{Family::LogLogistic, std::nullopt}};
}

ParamVector unit_theta(double rho) {
    ParamVector th = paper_truth(rho);
    th.margin1 = {0.0, {0.0}, {0.0}};
    th.margin2 = {0.0, {0.0}, {0.0}};
    return th;
}

McDesign small_design() {
    McDesign d = McDesign::paper_defaults();
    d.T_grid = {300};
    d.rho_grid = {0.5};
    d.replications = 6;
    d.seed = 9;
    d.threads = 1;
    return d;
}

}  // namespace

TEST_CASE("innovation pair reproduces the drawn radius") {
    for (const auto& gen : all_families()) {
        CAPTURE(family_token(gen.family));
        Rng rng(1);
        const ParamVector th = unit_theta(0.6);
        double worst = 0.0;
        for (int i = 0; i < 20000; ++i) {
            const InnovationDraw d = sample_innovation_pair(gen, th.rho, rng);
            const double q = quad_form(th, std::exp(d.w1), std::exp(d.w2), 1.0, 1.0);
            worst = std::max(worst, std::abs(q - d.r2) / std::max(1.0, d.r2));
        }
        CHECK(worst <= 1e-12);
    }
    Rng rng(1);
    CHECK_THROWS_AS(sample_innovation_pair(GeneratorSpec::lognormal(), 1.0, rng), DomainError);
}

TEST_CASE("log-normal radius is chi-squared with two degrees of freedom") {
    Rng rng(2024);
    const int n = 200000;
    std::vector<double> r2(n);
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    const double rho = 0.7;
    for (int i = 0; i < n; ++i) {
        const InnovationDraw d = sample_innovation_pair(GeneratorSpec::lognormal(), rho, rng);
        r2[i] = d.r2;
        s1 += d.w1;
        s2 += d.w2;
        s11 += d.w1 * d.w1;
        s22 += d.w2 * d.w2;
        s12 += d.w1 * d.w2;
    }
    const double d = stats::ks_statistic(r2, [](double x) { return 1.0 - std::exp(-x / 2.0); });
    CHECK(d < 1.949 / std::sqrt(double(n)));
    const double m1 = s1 / n, m2 = s2 / n;
    const double corr = (s12 / n - m1 * m2) / std::sqrt((s11 / n - m1 * m1) * (s22 / n - m2 * m2));
    CHECK(std::abs(corr - rho) < 0.01);
}

TEST_CASE("simulated quadratic forms follow the radial law for every family") {
    const double crit = 1.628 / std::sqrt(20000.0);
    for (const auto& gen : all_families()) {
        CAPTURE(family_token(gen.family));
        Rng rng(77);
        const ParamVector th = unit_theta(-0.3);
        std::vector<double> q;
        for (int i = 0; i < 20000; ++i) {
            const InnovationDraw d = sample_innovation_pair(gen, th.rho, rng);
            q.push_back(quad_form(th, std::exp(d.w1), std::exp(d.w2), 1.0, 1.0));
        }
        CHECK(stats::ks_statistic(q, [&](double x) { return radial_cdf(gen, x); }) < crit);
    }
}

TEST_CASE("simulate_series") {
    ModelSpec spec;
    SUBCASE("tiny sigma keeps y at the median") {
        ParamVector th = paper_truth(0.4);
        th.sigma1 = th.sigma2 = 1e-8;
        Rng rng(5);
        MedianPaths paths;
        const BiSeries s = simulate_series(spec, th, 500, rng, {}, &paths);
        for (std::size_t t = 0; t < s.size(); ++t) {
            CHECK(s.y1[t] / paths.eta1[t] >= 0.999);
            CHECK(s.y1[t] / paths.eta1[t] <= 1.001);
            CHECK(s.y2[t] / paths.eta2[t] >= 0.999);
            CHECK(s.y2[t] / paths.eta2[t] <= 1.001);
        }
    }
    SUBCASE("paths agree with the likelihood recursion") {
        Rng rng(6);
        MedianPaths paths;
        const ParamVector th = paper_truth(0.5);
        const BiSeries s = simulate_series(spec, th, 300, rng, {}, &paths);
        const MedianPaths again = recurse_medians(spec, th, s);
        for (std::size_t t = 0; t < s.size(); ++t) {
            CHECK(paths.eta1[t] == doctest::Approx(again.eta1[t]).epsilon(1e-12));
            CHECK(paths.eta2[t] == doctest::Approx(again.eta2[t]).epsilon(1e-12));
        }
    }
    SUBCASE("median of the ratio at a fixed t is one") {
        const ParamVector th = paper_truth(0.5);
        int above = 0;
        const int n = 100000;
        for (int rep = 0; rep < n; ++rep) {
            Rng rng = Rng::substream(31, 0, static_cast<std::uint64_t>(rep));
            MedianPaths paths;
            const BiSeries s = simulate_series(spec, th, 3, rng, {}, &paths);
            if (s.y1[2] > paths.eta1[2]) ++above;
        }
        // Binomial(1e5, 1/2): 4 standard deviations is about 632.
        CHECK(std::abs(above - n / 2) < 632);
    }
    SUBCASE("divergence is reported") {
        ParamVector th = paper_truth(0.5);
        th.margin1 = {0.0, {1.5}, {0.0}};
        th.margin1.omega = 5.0;
        Rng rng(1);
        CHECK_THROWS_AS(simulate_series(spec, th, 2000, rng), DivergenceError);
    }
    SUBCASE("zero length") {
        Rng rng(1);
        CHECK_THROWS_AS(simulate_series(spec, paper_truth(0.5), 0, rng), DomainError);
    }
}

TEST_CASE("estimator summary") {
    const EstimatorStats one = summarize_estimates({1.3}, 1.0);
    CHECK(one.mean == 1.3);
    CHECK(one.bias == doctest::Approx(0.3));
    CHECK(one.rmse == doctest::Approx(0.3));
    CHECK(one.variance == 0.0);

    const EstimatorStats s = summarize_estimates({0.9, 1.1, 1.4, 0.7, 1.2}, 1.0);
    CHECK(s.mean == doctest::Approx(1.06));
    CHECK(s.rmse * s.rmse == doctest::Approx(s.bias * s.bias + s.variance).epsilon(1e-12));
    CHECK(s.rmse >= std::abs(s.bias));
}

TEST_CASE("Monte Carlo harness") {
    const McDesign d = small_design();
    const McReport a = run_mc_study(d);
    REQUIRE(a.cells.size() == 1);
    const McCell& c = a.cell(0.5, 300);
    CHECK(c.attempted == 6);
    CHECK(c.used + c.failed == 6);
    CHECK(c.params.size() == 9);
    for (const auto& p : c.params) {
        CHECK(std::abs(p.rmse * p.rmse - (p.bias * p.bias + p.variance)) <= 1e-10);
        CHECK(p.rmse >= std::abs(p.bias));
    }
    CHECK(c.residuals.mean == doctest::Approx(2.0).epsilon(0.15));

    SUBCASE("bit-identical across runs and thread counts") {
        McDesign d2 = d;
        d2.threads = 3;
        std::ostringstream o1, o2;
        write_mc_csv(a, o1);
        write_mc_csv(run_mc_study(d2), o2);
        CHECK(o1.str() == o2.str());
    }
    SUBCASE("single replication equals a single fit") {
        McDesign d1 = d;
        d1.replications = 1;
        const McReport r = run_mc_study(d1);
        const McCell& one = r.cells.front();
        REQUIRE(one.used == 1);
        for (std::size_t j = 0; j < one.params.size(); ++j) {
            CHECK(one.params[j].bias == doctest::Approx(one.params[j].mean - r.truth_template[j]).epsilon(1e-14));
            CHECK(one.params[j].rmse == doctest::Approx(std::abs(one.params[j].bias)).epsilon(1e-14));
        }
    }
    SUBCASE("csv schema") {
        std::ostringstream os;
        write_mc_csv(a, os);
        std::istringstream is(os.str());
        std::string line;
        std::getline(is, line);
        CHECK(line == "rho,T,parameter,statistic,value");
        int rows = 0;
        while (std::getline(is, line)) {
            CHECK(std::count(line.begin(), line.end(), ',') == 4);
            ++rows;
        }
        CHECK(rows == 9 * 5 + 3 + 4);  // five statistics per parameter, counts, residual moments
        CHECK(format_mc_tables(a).find("RMSE") != std::string::npos);
    }
    SUBCASE("invalid designs") {
        McDesign bad = d;
        bad.replications = 0;
        CHECK_THROWS_AS(run_mc_study(bad), DomainError);
        bad = d;
        bad.T_grid.clear();
        CHECK_THROWS_AS(run_mc_study(bad), DomainError);
    }
}
