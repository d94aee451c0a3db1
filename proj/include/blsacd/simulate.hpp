#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "blsacd/estimate.hpp"
#include "blsacd/model.hpp"

namespace blsacd {

/// 64-bit Mersenne Twister with a fixed uniform mapping, so draws do not
/// depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    /// Independent stream for (seed, a, b), e.g. (seed, cell, replication).
    static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

    std::uint64_t next() { return eng_(); }
    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::mt19937_64 eng_;
};

struct InnovationDraw {
    double w1 = 0.0;
    double w2 = 0.0;
    double r2 = 0.0;  // the drawn squared radius
};

/// Spherical-radial draw: R^2 from the radial law, uniform angle, then the
/// correlation map w2 = rho z1 + sqrt(1 - rho^2) z2.
InnovationDraw sample_innovation_pair(const GeneratorSpec& gen, double rho, Rng& rng);

/// y_it = eta_it exp(sigma_i w_it) with the model's presample convention.
/// `paths`, when given, receives the conditional medians.
BiSeries simulate_series(const ModelSpec& spec, const ParamVector& theta, std::size_t n_obs, Rng& rng,
                         const LikelihoodOptions& presample = {}, MedianPaths* paths = nullptr);

struct McDesign {
    ModelSpec spec;
    ParamVector theta_true;  // rho is replaced by each rho_grid value
    std::vector<std::size_t> T_grid;
    std::vector<double> rho_grid;
    int replications = 1000;
    std::uint64_t seed = 1;
    /// 0 = hardware concurrency.
    int threads = 0;
    FitOptions fit;

    /// Log-normal BLS-ACD(1,1,1,1) at (1, 1, 0.2, 0.7, 0.1, 0.2, 0.7, 0.1),
    /// T in {500, 1000, 2000}, rho in {0.10, 0.25, 0.50, 0.75, 0.90}, 1000 runs.
    static McDesign paper_defaults();
    void validate() const;
};

struct EstimatorStats {
    double mean = 0.0;
    double bias = 0.0;
    double rmse = 0.0;
    double variance = 0.0;  // 1/n
    double skewness = 0.0;
    double kurtosis = 0.0;  // not excess
};

/// Per-replication sample statistics of the residuals, averaged over replications.
struct ResidualSummary {
    double mean = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

struct McCell {
    double rho = 0.0;
    std::size_t T = 0;
    int attempted = 0;
    int used = 0;
    int failed = 0;
    std::vector<EstimatorStats> params;  // ParamVector layout
    ResidualSummary residuals;
};

/// One replication's estimate; theta is empty when the fit was dropped.
struct McReplication {
    double rho = 0.0;
    std::size_t T = 0;
    int replication = 0;
    bool converged = false;
    std::vector<double> theta;
};

struct McReport {
    std::vector<std::string> param_names;
    std::vector<double> truth_template;  // theta_true with rho of the first cell
    std::vector<McCell> cells;           // rho-major, then T
    std::vector<McReplication> fits;     // cell order, then replication
    const McCell& cell(double rho, std::size_t n_obs) const;
};

/// Simulates and fits every (rho, T, replication). Non-convergent fits are
/// dropped and counted; throws NumericError when more than 20% of a cell fails.
/// Deterministic in the design (including seed) whatever the thread count.
McReport run_mc_study(const McDesign& design);

/// Aggregates a set of estimates; exposed for tests.
EstimatorStats summarize_estimates(const std::vector<double>& estimates, double truth);

/// CSV: rho,T,parameter,statistic,value
void write_mc_csv(const McReport& report, std::ostream& os);
/// CSV: rho,T,replication,converged,<parameter names>
void write_mc_fits_csv(const McReport& report, std::ostream& os);
/// Text tables in the layout of the bias / RMSE / skewness / kurtosis tables.
std::string format_mc_tables(const McReport& report);

}  // namespace blsacd
