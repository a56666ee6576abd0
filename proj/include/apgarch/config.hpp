#pragma once

// Monte Carlo experiment documents (JSON). Validation errors carry the path of
// the offending field, e.g. "dgp.alpha_plus[0]: must be >= 0".

#include "apgarch/errors.hpp"
#include "apgarch/experiments.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace apgarch {

class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& message)
        : Error(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

enum class StudyKind { Size, Power };

struct ExperimentSpec {
    StudyKind kind = StudyKind::Size;
    McConfig config;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path + key, "required field is missing");
    return j.at(key);
}

inline double number_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "must be a number");
    return j.get<double>();
}

inline long integer_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "must be an integer");
    return j.get<long>();
}

inline std::vector<double> numbers_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_at(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline ModelOrder order_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(path, "must be [p, q]");
    const long p = integer_at(j[0], path + "[0]");
    const long q = integer_at(j[1], path + "[1]");
    if (p < 0) throw ConfigError(path + "[0]", "p must be >= 0");
    if (q < 1) throw ConfigError(path + "[1]", "q must be >= 1");
    return {static_cast<int>(p), static_cast<int>(q)};
}

inline ParamVector params_at(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "must be an object");
    ParamVector p;
    p.order = order_at(require(j, "order", path + "."), path + ".order");
    p.omega = number_at(require(j, "omega", path + "."), path + ".omega");
    p.alpha_plus = numbers_at(require(j, "alpha_plus", path + "."), path + ".alpha_plus");
    p.alpha_minus = numbers_at(require(j, "alpha_minus", path + "."), path + ".alpha_minus");
    p.beta = j.contains("beta") ? numbers_at(j.at("beta"), path + ".beta") : std::vector<double>{};
    const char* power_key = j.contains("delta") ? "delta" : "tau";
    p.tau = number_at(require(j, power_key, path + "."), path + "." + power_key);

    const auto check_len = [&](const std::vector<double>& v, std::size_t want, const char* name) {
        if (v.size() != want)
            throw ConfigError(path + "." + name, "has length " + std::to_string(v.size()) + ", order needs " +
                                                     std::to_string(want));
    };
    check_len(p.alpha_plus, p.order.q, "alpha_plus");
    check_len(p.alpha_minus, p.order.q, "alpha_minus");
    check_len(p.beta, p.order.p, "beta");
    if (!(p.omega > 0.0)) throw ConfigError(path + ".omega", "must be > 0");
    if (!(p.tau > 0.0)) throw ConfigError(path + "." + power_key, "must be > 0");
    const auto check_nonneg = [&](const std::vector<double>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!(v[i] >= 0.0)) throw ConfigError(path + "." + name + "[" + std::to_string(i) + "]", "must be >= 0");
    };
    check_nonneg(p.alpha_plus, "alpha_plus");
    check_nonneg(p.alpha_minus, "alpha_minus");
    check_nonneg(p.beta, "beta");
    if (!(p.beta_sum() < 1.0)) throw ConfigError(path + ".beta", "sum must be < 1");
    return p;
}

inline InnovationSpec innovations_at(const nlohmann::json& j, const std::string& path) {
    if (j.is_string()) {
        if (j == "normal") return InnovationSpec::normal();
        throw ConfigError(path, "unknown innovation law (expected \"normal\" or {\"kind\":\"student_t\",\"nu\":...})");
    }
    const auto& kind = require(j, "kind", path + ".");
    if (kind == "normal") return InnovationSpec::normal();
    if (kind != "student_t") throw ConfigError(path + ".kind", "must be \"normal\" or \"student_t\"");
    const double nu = number_at(require(j, "nu", path + "."), path + ".nu");
    if (!(nu > 4.0)) throw ConfigError(path + ".nu", "must be > 4");
    return InnovationSpec::student_t(nu);
}

inline InitScheme init_from_name(const std::string& name, const std::string& path) {
    if (name == "mean") return InitScheme::mean();
    if (name == "zeros") return InitScheme::omega();
    throw ConfigError(path, "must be \"mean\" or \"zeros\"");
}

}  // namespace detail

inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("$", "experiment document must be an object");
    ExperimentSpec spec;
    McConfig& c = spec.config;
    c.dgp = params_at(require(j, "dgp", ""), "dgp");
    c.fit_order = j.contains("fit_order") ? order_at(j.at("fit_order"), "fit_order") : c.dgp.order;
    if (j.contains("study")) {
        const auto& s = j.at("study");
        if (s == "size") spec.kind = StudyKind::Size;
        else if (s == "power") spec.kind = StudyKind::Power;
        else throw ConfigError("study", "must be \"size\" or \"power\"");
    } else {
        spec.kind = c.fit_order == c.dgp.order ? StudyKind::Size : StudyKind::Power;
    }
    if (spec.kind == StudyKind::Size && !(c.fit_order == c.dgp.order))
        throw ConfigError("fit_order", "a size study fits the DGP order");
    if (spec.kind == StudyKind::Power && c.fit_order == c.dgp.order)
        throw ConfigError("fit_order", "a power study fits an order different from the DGP");
    if (j.contains("innovations")) c.innovations = innovations_at(j.at("innovations"), "innovations");
    const auto positive = [&](const char* key, std::size_t fallback) -> std::size_t {
        if (!j.contains(key)) return fallback;
        const long v = integer_at(j.at(key), key);
        if (v <= 0) throw ConfigError(key, "must be positive");
        return static_cast<std::size_t>(v);
    };
    c.n = positive("sample_size", spec.kind == StudyKind::Size ? 500 : 5000);
    c.n_replications = positive("replications", spec.kind == StudyKind::Size ? 500 : 100);
    c.workers = static_cast<unsigned>(positive("workers", 1));
    if (j.contains("burn_in")) {
        const long b = integer_at(j.at("burn_in"), "burn_in");
        if (b < 0) throw ConfigError("burn_in", "must be >= 0");
        c.burn_in = static_cast<std::size_t>(b);
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed", "must be a nonnegative integer");
        c.master_seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("m_values")) {
        const auto& mv = j.at("m_values");
        if (!mv.is_array() || mv.empty()) throw ConfigError("m_values", "must be a non-empty array");
        c.m_values.clear();
        for (std::size_t i = 0; i < mv.size(); ++i) {
            const long m = integer_at(mv[i], "m_values[" + std::to_string(i) + "]");
            if (m < 1) throw ConfigError("m_values[" + std::to_string(i) + "]", "must be >= 1");
            if (!c.m_values.empty() && m <= c.m_values.back())
                throw ConfigError("m_values[" + std::to_string(i) + "]", "values must be strictly ascending");
            c.m_values.push_back(static_cast<int>(m));
        }
    }
    if (j.contains("alpha_levels")) {
        c.alpha_levels = numbers_at(j.at("alpha_levels"), "alpha_levels");
        for (std::size_t i = 0; i < c.alpha_levels.size(); ++i)
            if (!(c.alpha_levels[i] > 0.0 && c.alpha_levels[i] < 1.0))
                throw ConfigError("alpha_levels[" + std::to_string(i) + "]", "must lie in (0,1)");
        if (c.alpha_levels.empty()) throw ConfigError("alpha_levels", "must not be empty");
    }
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        if (f.contains("tau_grid")) {
            c.fit_options.tau_grid = numbers_at(f.at("tau_grid"), "fit.tau_grid");
            if (c.fit_options.tau_grid.empty()) throw ConfigError("fit.tau_grid", "must not be empty");
            for (std::size_t i = 0; i < c.fit_options.tau_grid.size(); ++i)
                if (!(c.fit_options.tau_grid[i] > 0.0))
                    throw ConfigError("fit.tau_grid[" + std::to_string(i) + "]", "must be > 0");
        }
        if (f.contains("max_iterations")) {
            const long it = integer_at(f.at("max_iterations"), "fit.max_iterations");
            if (it <= 0) throw ConfigError("fit.max_iterations", "must be positive");
            c.fit_options.max_iterations = static_cast<int>(it);
        }
        if (f.contains("init")) {
            if (!f.at("init").is_string()) throw ConfigError("fit.init", "must be a string");
            c.fit_options.init = init_from_name(f.at("init").get<std::string>(), "fit.init");
        }
    }
    if (static_cast<double>(c.m_values.back()) >= static_cast<double>(c.n) / 10.0)
        throw ConfigError("m_values", "largest m must be below sample_size/10");
    if (c.n < static_cast<std::size_t>(10 * c.fit_order.n_params()))
        throw ConfigError("sample_size", "too small for the fitted order");
    return spec;
}

inline ExperimentSpec load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open experiment file");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path, std::string("invalid JSON: ") + e.what());
    }
    return experiment_from_json(j);
}

inline McTable run_experiment(const ExperimentSpec& spec) {
    return spec.kind == StudyKind::Size ? run_size_study(spec.config) : run_power_study(spec.config);
}

}  // namespace apgarch
