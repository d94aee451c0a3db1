#include "blsacd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "blsacd/data.hpp"
#include "blsacd/diagnostics.hpp"
#include "blsacd/errors.hpp"
#include "blsacd/fit_json.hpp"
#include "blsacd/format.hpp"
#include "blsacd/simulate.hpp"
#include "blsacd/stats.hpp"
#include "blsacd/svg.hpp"

namespace blsacd {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out_dir = ".";
    std::string family = "lognormal";
    std::optional<double> nu;
    std::vector<int> orders{1, 1, 1, 1};
};

ModelSpec model_spec(const Globals& g) {
    ModelSpec s;
    s.p1 = g.orders[0];
    s.q1 = g.orders[1];
    s.p2 = g.orders[2];
    s.q2 = g.orders[3];
    s.generator = {parse_family(g.family), g.nu};
    s.validate();
    return s;
}

// Family, nu and orders, with a missing nu allowed for profiling.
void check_model_flags(const Globals& g) {
    Globals probe = g;
    const Family fam = parse_family(g.family);
    if (family_has_extra(fam) && !g.nu) probe.nu = default_nu_grid(fam).at(0);
    model_spec(probe);
}

json config_echo(const std::string& command, const Globals& g) {
    json c;
    c["subcommand"] = command;
    c["seed"] = g.seed;
    c["threads"] = g.threads;
    c["out_dir"] = g.out_dir;
    c["family"] = g.family;
    c["nu"] = g.nu ? json(*g.nu) : json(nullptr);
    c["orders"] = g.orders;
    return c;
}

void write_text(const Globals& g, const std::string& name, const std::string& text) {
    const fs::path path = fs::path(g.out_dir) / name;
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw DataError("cannot write " + path.string());
}

void write_json(const Globals& g, const std::string& name, const json& j) { write_text(g, name, j.dump(2) + "\n"); }

template <class Writer>
void write_csv(const Globals& g, const std::string& name, Writer&& writer) {
    std::ostringstream os;
    writer(os);
    write_text(g, name, os.str());
}

json describe_json(const Describe& d) {
    json j;
    j["n"] = d.n;
    j["min"] = number_or_null(d.min);
    j["p10"] = number_or_null(d.p10);
    j["mean"] = number_or_null(d.mean);
    j["median"] = number_or_null(d.median);
    j["p90"] = number_or_null(d.p90);
    j["max"] = number_or_null(d.max);
    j["sd"] = number_or_null(d.sd);
    j["cv_percent"] = number_or_null(d.cv_percent);
    j["skewness"] = number_or_null(d.skewness);
    j["excess_kurtosis"] = number_or_null(d.excess_kurtosis);
    return j;
}

// Shared by fit, diagnose and forecast.
struct FitFlags {
    std::string input;
    bool raw = false;
    std::string gradient_mode = "exact_recursive";
    std::size_t burn_in = 0;
    std::vector<double> nu_grid;
    int starts = 5;
};

void add_fit_flags(CLI::App* sub, FitFlags& f) {
    sub->add_option("--input", f.input, "Pairs CSV (ingest output, or y1,y2 columns)")->required();
    sub->add_flag("--raw", f.raw, "Use the unadjusted columns of an ingest file");
    sub->add_option("--gradient-mode", f.gradient_mode, "exact_recursive or paper_literal");
    sub->add_option("--burn-in", f.burn_in, "Leading observations left out of the likelihood");
    sub->add_option("--nu-grid", f.nu_grid, "Profile grid for the shape parameter")->delimiter(',');
    sub->add_option("--starts", f.starts, "Maximum optimizer starts");
}

void echo_fit_flags(json& c, const FitFlags& f) {
    c["input"] = f.input;
    c["raw"] = f.raw;
    c["gradient_mode"] = f.gradient_mode;
    c["burn_in"] = f.burn_in;
    c["nu_grid"] = f.nu_grid;
    c["starts"] = f.starts;
}

FitOptions fit_options(const Globals& g, const FitFlags& f) {
    FitOptions o;
    o.gradient_mode = parse_gradient_mode(f.gradient_mode);
    o.likelihood.burn_in = f.burn_in;
    if (f.starts < 1) throw DomainError("--starts must be at least 1");
    o.starts = f.starts;
    o.seed = g.seed;
    return o;
}

/// Fixed nu when given, otherwise a profile over --nu-grid or the default grid.
FitResult fit_configured(const Globals& g, const BiSeries& s, const FitOptions& o, const FitFlags& f) {
    const Family fam = parse_family(g.family);
    Globals fixed = g;
    const bool profile = family_has_extra(fam) && (!g.nu || !f.nu_grid.empty());
    if (!family_has_extra(fam) && !f.nu_grid.empty()) {
        throw DomainError("--nu-grid given for a family without a shape parameter");
    }
    if (profile) {
        const auto grid = f.nu_grid.empty() ? default_nu_grid(fam) : f.nu_grid;
        fixed.nu = grid.at(0);
        return fit_profile_nu(model_spec(fixed), s, grid, o);
    }
    return fit(model_spec(g), s, o);
}

void report_fit(const FitResult& r, std::ostream& out, std::ostream& err) {
    out << family_token(r.spec.generator.family) << ": loglik " << fmt(r.loglik_at_max) << ", aic " << fmt(r.aic)
        << ", converged " << (r.converged ? "true" : "false") << '\n';
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
}

int cmd_ingest(const Globals& g, const std::string& input, const std::string& session_text,
               const std::string& count_mode, double bin_minutes, std::ostream& out) {
    json c = config_echo("ingest", g);
    c["input"] = input;
    c["session"] = session_text;
    c["count_mode"] = count_mode;
    c["bin_minutes"] = bin_minutes;

    const Session session = Session::parse(session_text);
    const CountMode mode = parse_count_mode(count_mode);
    if (!(bin_minutes > 0)) throw DomainError("--bin-minutes must be positive");
    const TradeTape tape = read_tape_file(input, session);
    const PairSeries pairs = build_pairs(tape, mode);
    const DiurnalResult d = diurnal_adjust(pairs.series, session, bin_minutes);

    json desc;
    desc["records"] = tape.records.size();
    desc["outside_session"] = tape.outside_session;
    desc["changes"] = pairs.changes;
    desc["pairs"] = pairs.series.size();
    desc["y1_raw"] = describe_json(describe(pairs.series.y1));
    desc["y2_raw"] = describe_json(describe(pairs.series.y2));
    desc["y1_adj"] = describe_json(describe(d.adjusted.y1));
    desc["y2_adj"] = describe_json(describe(d.adjusted.y2));
    desc["bid_ask_range"] = describe_json(describe(bid_ask_range(tape)));

    write_json(g, "config.json", c);
    write_csv(g, "pairs.csv", [&](std::ostream& os) { write_pairs_csv(pairs, d.adjusted, os); });
    write_json(g, "describe.json", desc);
    out << "ingest: " << tape.records.size() << " records, " << pairs.series.size() << " pairs\n";
    return kExitOk;
}

int cmd_fit(const Globals& g, const FitFlags& f, bool all_families, std::ostream& out, std::ostream& err) {
    json c = config_echo("fit", g);
    echo_fit_flags(c, f);
    c["all_families"] = all_families;
    check_model_flags(g);

    const FitOptions o = fit_options(g, f);
    const BiSeries s = read_series_file(f.input, f.raw);
    write_json(g, "config.json", c);

    if (!all_families) {
        const FitResult r = fit_configured(g, s, o, f);
        write_json(g, "fit.json", fit_to_json(r));
        report_fit(r, out, err);
        return kExitOk;
    }
    ModelSpec orders;
    orders.p1 = g.orders[0];
    orders.q1 = g.orders[1];
    orders.p2 = g.orders[2];
    orders.q2 = g.orders[3];
    orders.validate();
    const auto fits = fit_all_families(orders, s, o);
    json arr = json::array();
    std::ostringstream table;
    table << "family,nu,k,loglik,aic,bic,caic,converged\n";
    for (const auto& r : fits) {
        arr.push_back(fit_to_json(r));
        table << family_token(r.spec.generator.family) << ','
              << (r.spec.generator.extra ? fmt(*r.spec.generator.extra) : std::string("NA")) << ',' << r.k << ','
              << fmt(r.loglik_at_max) << ',' << fmt(r.aic) << ',' << fmt(r.bic) << ',' << fmt(r.caic) << ','
              << (r.converged ? "true" : "false") << '\n';
        report_fit(r, out, err);
    }
    write_json(g, "fits.json", arr);
    write_text(g, "comparison.csv", table.str());
    return kExitOk;
}

int cmd_simulate(const Globals& g, std::size_t n, double rho, const std::vector<double>& theta_flat,
                 std::ostream& out) {
    json c = config_echo("simulate", g);
    c["T"] = n;
    c["rho"] = rho;
    c["theta"] = theta_flat;

    const ModelSpec spec = model_spec(g);
    ParamVector theta;
    if (theta_flat.empty()) {
        if (spec.p1 != 1 || spec.q1 != 1 || spec.p2 != 1 || spec.q2 != 1)
            throw DomainError("--theta is required unless the orders are 1,1,1,1");
        theta = McDesign::paper_defaults().theta_true;
        theta.rho = rho;
    } else {
        if (theta_flat.size() != spec.num_params()) {
            throw DomainError("--theta needs " + std::to_string(spec.num_params()) + " values");
        }
        theta = ParamVector::from_vector(spec, Eigen::Map<const Eigen::VectorXd>(
                                                   theta_flat.data(), static_cast<Eigen::Index>(theta_flat.size())));
    }
    theta.validate(spec);
    if (n == 0) throw DomainError("--T must be positive");

    Rng rng(g.seed);
    MedianPaths paths;
    const BiSeries s = simulate_series(spec, theta, n, rng, {}, &paths);
    write_json(g, "config.json", c);
    write_csv(g, "series.csv", [&](std::ostream& os) { write_series_csv(s, &paths, os); });
    out << "simulate: " << n << " pairs\n";
    return kExitOk;
}

int cmd_mc(const Globals& g, bool paper_defaults, std::optional<int> replications, const std::vector<std::size_t>& T,
           const std::vector<double>& rho, std::ostream& out) {
    json c = config_echo("mc", g);
    c["paper_defaults"] = paper_defaults;
    c["replications"] = replications ? json(*replications) : json(nullptr);
    c["T"] = T;
    c["rho"] = rho;

    McDesign d = McDesign::paper_defaults();
    const ModelSpec spec = model_spec(g);
    if (!(spec.p1 == 1 && spec.q1 == 1 && spec.p2 == 1 && spec.q2 == 1))
        throw DomainError("mc runs the (1,1,1,1) design");
    d.spec = spec;
    if (!paper_defaults && (T.empty() || rho.empty())) throw DomainError("mc needs --paper-defaults or --T and --rho");
    if (!T.empty()) d.T_grid = T;
    if (!rho.empty()) d.rho_grid = rho;
    if (replications) d.replications = *replications;
    d.seed = g.seed;
    d.threads = g.threads;
    d.fit.seed = g.seed;
    d.validate();

    const McReport report = run_mc_study(d);
    write_json(g, "config.json", c);
    write_csv(g, "mc.csv", [&](std::ostream& os) { write_mc_csv(report, os); });
    write_csv(g, "mc_fits.csv", [&](std::ostream& os) { write_mc_fits_csv(report, os); });
    write_text(g, "mc_tables.txt", format_mc_tables(report));
    int failed = 0;
    for (const auto& cell : report.cells) failed += cell.failed;
    out << "mc: " << report.cells.size() << " cells, " << report.fits.size() << " replications, " << failed
        << " dropped\n";
    return kExitOk;
}

int cmd_diagnose(const Globals& g, const FitFlags& f, const std::string& fit_path, int max_lag, bool svg,
                 std::ostream& out, std::ostream& err) {
    json c = config_echo("diagnose", g);
    echo_fit_flags(c, f);
    c["fit"] = fit_path;
    c["max_lag"] = max_lag;
    c["svg"] = svg;
    if (fit_path.empty()) check_model_flags(g);

    const BiSeries s = read_series_file(f.input, f.raw);
    FitResult r;
    if (!fit_path.empty()) {
        std::ifstream in(fit_path);
        if (!in) throw DataError("cannot open " + fit_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError(fit_path + ": " + e.what());
        }
        r = fit_from_json(j);
    } else {
        r = fit_configured(g, s, fit_options(g, f), f);
        report_fit(r, out, err);
    }
    LikelihoodOptions lo;
    lo.burn_in = r.burn_in;
    const ResidualSeries res = residuals(r.spec, r.theta_hat, s, lo);
    const auto qq = qq_points(res);
    const Correlogram cg = acf_pacf(res.re, max_lag);
    const KsResult ks = ks_test(res);
    const stats::Moments m = stats::moments(res.re);

    json d;
    d["family"] = std::string(family_token(r.spec.generator.family));
    d["nu"] = r.spec.generator.extra ? json(*r.spec.generator.extra) : json(nullptr);
    d["n"] = res.re.size();
    d["ks_statistic"] = number_or_null(ks.statistic);
    d["ks_p_value"] = number_or_null(ks.p_value);
    d["upper_tail_share"] = number_or_null(qq_upper_tail_share(qq));
    d["upper_tail_deviation"] = qq_upper_tail_deviation(qq);
    d["residual_mean"] = number_or_null(m.mean);
    d["residual_sd"] = number_or_null(stats::sample_sd(res.re));
    d["residual_skewness"] = number_or_null(m.skewness);
    d["residual_kurtosis"] = number_or_null(m.kurtosis);
    d["acf_band"] = number_or_null(cg.band);
    int outside = 0;
    for (double a : cg.acf) outside += std::abs(a) > cg.band;
    d["acf_lags_outside_band"] = outside;

    write_json(g, "config.json", c);
    if (fit_path.empty()) write_json(g, "fit.json", fit_to_json(r));
    write_csv(g, "qq.csv", [&](std::ostream& os) { write_qq_csv(qq, os); });
    write_csv(g, "acf.csv", [&](std::ostream& os) { write_correlogram_csv(cg, os); });
    write_json(g, "diagnose.json", d);
    if (svg) {
        write_text(g, "qq.svg", svg_qq(qq, "QQ plot of residuals"));
        write_text(g, "acf.svg", svg_correlogram(cg, "Residual ACF"));
    }
    out << "diagnose: KS " << fmt(ks.statistic) << " (p " << fmt(ks.p_value) << ")\n";
    return kExitOk;
}

int cmd_forecast(const Globals& g, const FitFlags& f, const std::string& split_text, double nominal, bool svg,
                 std::ostream& out, std::ostream& err) {
    json c = config_echo("forecast", g);
    echo_fit_flags(c, f);
    c["split"] = split_text;
    c["nominal"] = nominal;
    c["svg"] = svg;
    check_model_flags(g);

    const double fraction = parse_fraction(split_text);
    if (!(nominal > 0 && nominal < 1)) throw DomainError("--nominal must lie in (0, 1)");
    const FitOptions o = fit_options(g, f);
    const BiSeries s = read_series_file(f.input, f.raw);
    const std::size_t cut = split_point(s.size(), fraction);
    if (cut < 2 || cut >= s.size()) throw DataError("split leaves an empty in- or out-of-sample part");
    const BiSeries in = s.slice(0, cut);
    const BiSeries outs = s.slice(cut, s.size());

    const FitResult r = fit_configured(g, in, o, f);
    report_fit(r, out, err);
    const PredictionBand b = predict_intervals(r.spec, r.theta_hat, in, outs, nominal, o.likelihood);

    json cov;
    cov["nominal_percent"] = 100.0 * nominal;
    cov["n_in"] = in.size();
    cov["n_out"] = outs.size();
    cov["coverage_y1_percent"] = 100.0 * b.coverage1;
    cov["coverage_y2_percent"] = 100.0 * b.coverage2;

    write_json(g, "config.json", c);
    write_json(g, "fit.json", fit_to_json(r));
    write_csv(g, "band.csv", [&](std::ostream& os) { write_band_csv(b, cut + 1, os); });
    write_json(g, "coverage.json", cov);
    if (svg) {
        write_text(g, "band_y1.svg", svg_band(b, 0, "Durations: prediction band"));
        write_text(g, "band_y2.svg", svg_band(b, 1, "Counts: prediction band"));
    }
    out << "forecast: coverage " << fmt(100.0 * b.coverage1) << "% / " << fmt(100.0 * b.coverage2) << "%\n";
    return kExitOk;
}

}  // namespace

double parse_fraction(const std::string& text) {
    const auto number = [&](std::string_view s) {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) throw DomainError("bad fraction '" + text + "'");
        return v;
    };
    const auto slash = text.find('/');
    const double v = slash == std::string::npos
                         ? number(text)
                         : number(std::string_view(text).substr(0, slash)) /
                               number(std::string_view(text).substr(slash + 1));
    if (!(v > 0 && v < 1)) throw DomainError("fraction '" + text + "' must lie in (0, 1)");
    return v;
}

std::vector<FitResult> fit_all_families(const ModelSpec& orders, const BiSeries& series, const FitOptions& options) {
    std::vector<FitResult> out;
    for (Family fam : kAllFamilies) {
        ModelSpec spec = orders;
        spec.generator = {fam, std::nullopt};
        if (family_has_extra(fam)) {
            out.push_back(fit_profile_nu(spec, series, default_nu_grid(fam), options));
        } else {
            out.push_back(fit(spec, series, options));
        }
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bivariate log-symmetric ACD models", "blsacd"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--family", g.family, "lognormal, logt, loghyperbolic, loglaplace, logslash, logpexp, loglogistic");
    app.add_option("--nu", g.nu, "Shape parameter of the family");
    app.add_option("--orders", g.orders, "p1,q1,p2,q2")->delimiter(',')->expected(4);

    auto* ingest = app.add_subcommand("ingest", "Build duration/count pairs from a quote tape");
    std::string tape, session = "09:30-16:00", count_mode = "all";
    double bin_minutes = 60.0;
    ingest->add_option("--input", tape, "CSV with timestamp,bid,ask")->required();
    ingest->add_option("--session", session, "HH:MM-HH:MM");
    ingest->add_option("--count-mode", count_mode, "all or changes-only");
    ingest->add_option("--bin-minutes", bin_minutes, "Diurnal bin width");

    FitFlags fit_flags;
    bool all_families = false;
    auto* fitc = app.add_subcommand("fit", "Maximum-likelihood fit");
    add_fit_flags(fitc, fit_flags);
    fitc->add_flag("--all-families", all_families, "Fit every family and compare");

    auto* sim = app.add_subcommand("simulate", "Simulate one series");
    std::size_t sim_T = 1000;
    double sim_rho = 0.5;
    std::vector<double> theta;
    sim->add_option("--T", sim_T, "Series length");
    sim->add_option("--rho", sim_rho, "Correlation for the default parameters");
    sim->add_option("--theta", theta, "Flat parameter vector")->delimiter(',');

    auto* mc = app.add_subcommand("mc", "Monte Carlo study");
    bool paper = false;
    std::optional<int> reps;
    std::vector<std::size_t> mc_T;
    std::vector<double> mc_rho;
    mc->add_flag("--paper-defaults", paper, "The published simulation grid");
    mc->add_option("--replications", reps, "Replications per cell");
    mc->add_option("--T", mc_T, "Sample sizes")->delimiter(',');
    mc->add_option("--rho", mc_rho, "Correlations")->delimiter(',');

    FitFlags diag_flags;
    std::string fit_path;
    int max_lag = 20;
    bool diag_svg = false;
    auto* diag = app.add_subcommand("diagnose", "Residual diagnostics");
    add_fit_flags(diag, diag_flags);
    diag->add_option("--fit", fit_path, "fit.json to reuse instead of refitting");
    diag->add_option("--max-lag", max_lag, "Correlogram lags");
    diag->add_flag("--svg", diag_svg, "Also write SVG plots");

    FitFlags fc_flags;
    std::string split = "2/3";
    double nominal = 0.95;
    bool fc_svg = false;
    auto* fc = app.add_subcommand("forecast", "Out-of-sample prediction bands");
    add_fit_flags(fc, fc_flags);
    fc->add_option("--split", split, "In-sample fraction");
    fc->add_option("--nominal", nominal, "Nominal band coverage");
    fc->add_flag("--svg", fc_svg, "Also write SVG plots");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        fs::create_directories(g.out_dir);
        if (*ingest) return cmd_ingest(g, tape, session, count_mode, bin_minutes, out);
        if (*fitc) return cmd_fit(g, fit_flags, all_families, out, err);
        if (*sim) return cmd_simulate(g, sim_T, sim_rho, theta, out);
        if (*mc) return cmd_mc(g, paper, reps, mc_T, mc_rho, out);
        if (*diag) return cmd_diagnose(g, diag_flags, fit_path, max_lag, diag_svg, out, err);
        return cmd_forecast(g, fc_flags, split, nominal, fc_svg, out, err);
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DomainError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace blsacd
