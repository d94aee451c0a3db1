#include "blsacd/fit_json.hpp"

#include <cmath>
#include <limits>

#include "blsacd/errors.hpp"

namespace blsacd {

using json = nlohmann::ordered_json;

namespace {

double number(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!j.is_number()) throw DataError("expected a number in fit JSON");
    return j.get<double>();
}

const json& field(const json& j, const char* name) {
    if (!j.contains(name)) throw DataError(std::string("fit JSON lacks '") + name + "'");
    return j.at(name);
}

}  // namespace

json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json fit_to_json(const FitResult& f) {
    json j;
    j["family"] = std::string(family_token(f.spec.generator.family));
    j["nu"] = f.spec.generator.extra ? json(*f.spec.generator.extra) : json(nullptr);
    j["orders"] = {f.spec.p1, f.spec.q1, f.spec.p2, f.spec.q2};
    const auto names = ParamVector::names(f.spec);
    const Eigen::VectorXd th = f.theta_hat.to_vector();
    json theta = json::object();
    json se = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        theta[names[k]] = number_or_null(th[i]);
        se[names[k]] = i < f.se.size() ? number_or_null(f.se[i]) : json(nullptr);
    }
    j["theta_hat"] = theta;
    j["se"] = se;
    j["se_available"] = f.se_available;
    j["loglik_at_max"] = number_or_null(f.loglik_at_max);
    j["aic"] = number_or_null(f.aic);
    j["bic"] = number_or_null(f.bic);
    j["caic"] = number_or_null(f.caic);
    j["nu_hat"] = f.nu_hat ? number_or_null(*f.nu_hat) : json(nullptr);
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["grad_norm_at_max"] = number_or_null(f.grad_norm_at_max);
    j["presample_convention"] = f.presample_convention;
    j["gradient_mode"] = std::string(gradient_mode_token(f.gradient_mode));
    j["k"] = f.k;
    j["n_obs"] = f.n_obs;
    j["burn_in"] = f.burn_in;
    j["starts_used"] = f.starts_used;
    j["at_boundary"] = f.at_boundary;
    j["floor_hits"] = f.floor_hits;
    json prof = json::array();
    for (const auto& [nu, ll] : f.profile) prof.push_back({nu, number_or_null(ll)});
    j["profile"] = prof;
    j["warnings"] = f.warnings;
    return j;
}

FitResult fit_from_json(const json& j) {
    try {
        FitResult f;
        f.spec.generator.family = parse_family(field(j, "family").get<std::string>());
        if (!field(j, "nu").is_null()) f.spec.generator.extra = number(j.at("nu"));
        const auto orders = field(j, "orders").get<std::vector<int>>();
        if (orders.size() != 4) throw DataError("orders must have four entries");
        f.spec.p1 = orders[0];
        f.spec.q1 = orders[1];
        f.spec.p2 = orders[2];
        f.spec.q2 = orders[3];
        f.spec.validate();

        const auto names = ParamVector::names(f.spec);
        const Eigen::Index n = static_cast<Eigen::Index>(names.size());
        Eigen::VectorXd th(n);
        f.se.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            th[i] = number(field(field(j, "theta_hat"), names[static_cast<std::size_t>(i)].c_str()));
            f.se[i] = number(field(field(j, "se"), names[static_cast<std::size_t>(i)].c_str()));
        }
        f.theta_hat = ParamVector::from_vector(f.spec, th);
        f.se_available = field(j, "se_available").get<bool>();
        f.loglik_at_max = number(field(j, "loglik_at_max"));
        f.aic = number(field(j, "aic"));
        f.bic = number(field(j, "bic"));
        f.caic = number(field(j, "caic"));
        if (!field(j, "nu_hat").is_null()) f.nu_hat = number(j.at("nu_hat"));
        f.converged = field(j, "converged").get<bool>();
        f.iterations = field(j, "iterations").get<int>();
        f.grad_norm_at_max = number(field(j, "grad_norm_at_max"));
        f.presample_convention = field(j, "presample_convention").get<std::string>();
        f.gradient_mode = parse_gradient_mode(field(j, "gradient_mode").get<std::string>());
        f.k = field(j, "k").get<int>();
        f.n_obs = field(j, "n_obs").get<std::size_t>();
        f.burn_in = field(j, "burn_in").get<std::size_t>();
        f.starts_used = field(j, "starts_used").get<int>();
        f.at_boundary = field(j, "at_boundary").get<bool>();
        f.floor_hits = field(j, "floor_hits").get<std::size_t>();
        for (const auto& p : field(j, "profile")) f.profile.emplace_back(number(p.at(0)), number(p.at(1)));
        f.warnings = field(j, "warnings").get<std::vector<std::string>>();
        return f;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed fit JSON: ") + e.what());
    } catch (const DomainError& e) {
        throw DataError(std::string("malformed fit JSON: ") + e.what());
    }
}

}  // namespace blsacd
