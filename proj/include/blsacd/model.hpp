#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "blsacd/generators.hpp"

namespace blsacd {

/// Lag orders of the two median recursions plus the density generator.
/// p_i counts lags of log(eta_i), q_i counts lags of y_i / eta_i.
struct ModelSpec {
    int p1 = 1;
    int q1 = 1;
    int p2 = 1;
    int q2 = 1;
    GeneratorSpec generator;

    static constexpr int kMaxOrder = 10;

    int p(int margin) const { return margin == 0 ? p1 : p2; }
    int q(int margin) const { return margin == 0 ? q1 : q2; }
    /// 5 + p1 + q1 + p2 + q2
    std::size_t num_params() const;
    /// Index of omega_i in the flat parameter layout.
    std::size_t margin_offset(int margin) const;
    void validate() const;
};

/// omega + sum_j alpha_j log(eta_{t-j}) + sum_j beta_j y_{t-j}/eta_{t-j}
struct MarginDynamics {
    double omega = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
};

/// Full parameter vector. Flat layout (to_vector / from_vector) is
/// (sigma1, sigma2, rho, omega1, alpha1.., beta1.., omega2, alpha2.., beta2..).
struct ParamVector {
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double rho = 0.0;
    MarginDynamics margin1;
    MarginDynamics margin2;

    double sigma(int margin) const { return margin == 0 ? sigma1 : sigma2; }
    const MarginDynamics& margin(int i) const { return i == 0 ? margin1 : margin2; }

    Eigen::VectorXd to_vector() const;
    static ParamVector from_vector(const ModelSpec& spec, const Eigen::VectorXd& v);
    /// Names matching the flat layout: sigma1, sigma2, rho, omega1, alpha11, ..., beta21, ...
    static std::vector<std::string> names(const ModelSpec& spec);

    /// Throws DomainError on wrong lag lengths, sigma <= 0, |rho| >= 1 or non-finite entries.
    void validate(const ModelSpec& spec) const;
};

/// Observed pairs (y1_t, y2_t); optional timestamps (seconds) for spell ends.
struct BiSeries {
    std::vector<double> y1;
    std::vector<double> y2;
    std::vector<double> timestamps;

    std::size_t size() const { return y1.size(); }
    /// Throws DataError unless non-empty, equal lengths, and every entry finite and > 0.
    void validate() const;
    BiSeries slice(std::size_t begin, std::size_t end) const;
};

struct MedianPaths {
    std::vector<double> eta1;
    std::vector<double> eta2;
    const std::vector<double>& eta(int margin) const { return margin == 0 ? eta1 : eta2; }
};

/// paper_literal: lagged log(eta) and y/eta enter the derivatives as fixed regressors.
/// exact_recursive: derivatives carried through the median recursion.
enum class GradientMode { PaperLiteral, ExactRecursive };

std::string_view gradient_mode_token(GradientMode mode);
GradientMode parse_gradient_mode(std::string_view token);

/// Presample convention and likelihood options.
struct LikelihoodOptions {
    /// log(eta_{i,t}) for t <= 0; the ratio y/eta is 1 there.
    double presample_log_eta1 = 0.0;
    double presample_log_eta2 = 0.0;
    /// Leading terms dropped from the likelihood sums.
    std::size_t burn_in = 0;
    /// Add the data-only term -sum(log y1 + log y2) and -T log Z.
    bool include_constant = false;
};

/// Lower bound applied to q before evaluating log g, h and h'.
inline constexpr double kQuadFormFloor = 1e-300;

MedianPaths recurse_medians(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                            const LikelihoodOptions& opts = {});

double quad_form(const ParamVector& theta, double y1, double y2, double eta1, double eta2);

struct LikelihoodEval {
    double value = 0.0;
    Eigen::VectorXd gradient;  // empty unless requested
    Eigen::MatrixXd hessian;   // empty unless requested
    std::size_t floor_hits = 0;
};

enum class EvalOrder { Value, Gradient, Hessian };

/// Log-likelihood (without the additive data constant unless requested) and,
/// on request, its first and second derivatives in the flat parameter layout.
LikelihoodEval evaluate(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                        EvalOrder order, GradientMode mode = GradientMode::PaperLiteral,
                        const LikelihoodOptions& opts = {});

double loglik(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
              const LikelihoodOptions& opts = {});
Eigen::VectorXd score(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                      GradientMode mode = GradientMode::PaperLiteral, const LikelihoodOptions& opts = {});
Eigen::MatrixXd hessian(const ModelSpec& spec, const ParamVector& theta, const BiSeries& series,
                        GradientMode mode = GradientMode::PaperLiteral,
                        const LikelihoodOptions& opts = {});

}  // namespace blsacd
