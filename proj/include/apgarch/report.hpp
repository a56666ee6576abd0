#pragma once

// Fit-and-test adequacy reports over several candidate orders: one row per
// order with p-values for m = 1..m_max and the estimated power.

#include "apgarch/diagnostics.hpp"
#include "apgarch/estimation.hpp"
#include "apgarch/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace apgarch {

struct OrderAdequacy {
    ModelOrder order;
    bool ok = false;
    std::string error;               // set when !ok
    std::optional<FitResult> fit;
    std::optional<DiagnosticsReport> diagnostics;
};

struct DatasetMetadata {
    std::string source;
    std::string column;
    std::string transform;
    double scale = 1.0;
    std::size_t n = 0;
};

struct AdequacyReport {
    DatasetMetadata dataset;
    int m_max = 12;
    std::vector<OrderAdequacy> per_order;

    std::size_t n_succeeded() const {
        std::size_t k = 0;
        for (const auto& o : per_order) k += o.ok;
        return k;
    }
};

inline const std::vector<ModelOrder>& default_order_grid() {
    static const std::vector<ModelOrder> grid{{0, 1}, {1, 1}, {1, 2}, {2, 1}, {2, 2}};
    return grid;
}

/// Fits every order and runs the portmanteau test; failures are kept inline.
inline AdequacyReport fit_test_report(const Series& series, const std::vector<ModelOrder>& orders, int m_max,
                                      const FitOptions& options, DatasetMetadata meta = {}) {
    AdequacyReport rep;
    meta.n = series.size();
    rep.dataset = std::move(meta);
    rep.m_max = m_max;
    for (const auto& order : orders) {
        OrderAdequacy row;
        row.order = order;
        try {
            FitResult fr = fit(series, order, options);
            if (!fr.converged) {
                row.error = "fit did not converge";
                row.fit = std::move(fr);
            } else if (fr.j_singular) {
                row.error = "J singular at the estimate";
                row.fit = std::move(fr);
            } else {
                row.diagnostics = portmanteau_test(series, fr, m_max);
                row.fit = std::move(fr);
                row.ok = true;
            }
        } catch (const Error& e) {
            row.error = e.what();
        }
        rep.per_order.push_back(std::move(row));
    }
    return rep;
}

inline std::string render_adequacy_text(const AdequacyReport& rep, double alpha = 0.05) {
    std::ostringstream os;
    char buf[128];
    os << "Portmanteau p-values for APGARCH adequacy";
    if (!rep.dataset.source.empty()) os << " (" << rep.dataset.source << ")";
    os << "\n  n = " << rep.dataset.n;
    if (!rep.dataset.transform.empty()) os << ", transform = " << rep.dataset.transform << ", scale = " << rep.dataset.scale;
    os << "\n  '*' marks p < " << alpha << "\n\n";
    os << "order ";
    for (int m = 1; m <= rep.m_max; ++m) {
        std::snprintf(buf, sizeof buf, "%7s", ("m=" + std::to_string(m)).c_str());
        os << buf;
    }
    os << "   tau_hat\n";
    for (const auto& row : rep.per_order) {
        std::snprintf(buf, sizeof buf, "%-6s", to_string(row.order).c_str());
        os << buf;
        if (!row.ok) {
            os << " failed: " << row.error << '\n';
            continue;
        }
        for (const auto& lag : row.diagnostics->per_lag) {
            if (lag.p_value)
                std::snprintf(buf, sizeof buf, "%6.3f%c", *lag.p_value, *lag.p_value < alpha ? '*' : ' ');
            else
                std::snprintf(buf, sizeof buf, "%7s", "n/a");
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%10.2f", row.fit->params_hat.tau);
        os << buf << '\n';
    }
    os << "\nEstimates (standard errors)\n";
    for (const auto& row : rep.per_order) {
        if (!row.fit) continue;
        const Vector th = row.fit->params_hat.flat();
        os << to_string(row.order) << ":";
        for (Eigen::Index k = 0; k < th.size(); ++k) {
            if (row.fit->std_errors.size() == th.size())
                std::snprintf(buf, sizeof buf, " %.4g (%.2g)", th(k), row.fit->std_errors(k));
            else
                std::snprintf(buf, sizeof buf, " %.4g", th(k));
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "  kappa=%.3f%s\n", row.fit->kappa_hat,
                      row.fit->at_boundary ? "  [boundary]" : "");
        os << buf;
    }
    os << "\nBox-Pierce / Ljung-Box on squared residuals at m=" << rep.m_max
       << " (naive chi2 reference, not robust to conditional heteroscedasticity)\n";
    for (const auto& row : rep.per_order) {
        if (!row.ok) continue;
        const auto& d = *row.diagnostics;
        std::snprintf(buf, sizeof buf, "%-6s Q_BP=%.3f (p=%.3f)  Q_LB=%.3f (p=%.3f)\n", to_string(row.order).c_str(),
                      d.bp_statistic, d.bp_lb_pvalues.first, d.lb_statistic, d.bp_lb_pvalues.second);
        os << buf;
    }
    return os.str();
}

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

inline nlohmann::json params_json(const ParamVector& p) {
    return {{"order", {p.order.p, p.order.q}}, {"omega", p.omega}, {"alpha_plus", p.alpha_plus},
            {"alpha_minus", p.alpha_minus}, {"beta", p.beta}, {"tau", p.tau}};
}

}  // namespace detail

/// JSON rendering, schema version 1.
inline nlohmann::json adequacy_json(const AdequacyReport& rep) {
    nlohmann::json j;
    j["schema"] = 1;
    j["kind"] = "adequacy_report";
    j["dataset"] = {{"source", rep.dataset.source}, {"column", rep.dataset.column},
                    {"transform", rep.dataset.transform}, {"scale", rep.dataset.scale}, {"n", rep.dataset.n}};
    j["m_max"] = rep.m_max;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : rep.per_order) {
        nlohmann::json r;
        r["order"] = {row.order.p, row.order.q};
        r["ok"] = row.ok;
        if (!row.ok) r["error"] = row.error;
        if (row.fit) {
            const auto& f = *row.fit;
            r["fit"] = {{"params", detail::params_json(f.params_hat)},
                        {"tau_hat", f.params_hat.tau},
                        {"objective", f.objective},
                        {"kappa_hat", f.kappa_hat},
                        {"converged", f.converged},
                        {"at_boundary", f.at_boundary},
                        {"j_singular", f.j_singular},
                        {"iterations", f.iterations},
                        {"restarts", f.n_restarts_used}};
            if (f.std_errors.size() > 0)
                r["fit"]["std_errors"] = std::vector<double>(f.std_errors.data(), f.std_errors.data() + f.std_errors.size());
        }
        if (row.diagnostics) {
            const auto& d = *row.diagnostics;
            nlohmann::json lags = nlohmann::json::array();
            for (const auto& l : d.per_lag)
                lags.push_back({{"m", l.m},
                                {"statistic", detail::optional_number(l.statistic)},
                                {"p_value", detail::optional_number(l.p_value)},
                                {"d_floored", l.d_floored},
                                {"bp_statistic", l.bp_statistic},
                                {"lb_statistic", l.lb_statistic},
                                {"bp_p_value_nonrobust", l.bp_p_value},
                                {"lb_p_value_nonrobust", l.lb_p_value}});
            r["diagnostics"] = {{"r", d.r_m.r},
                                {"C_m_hat", detail::matrix_json(d.C_m_hat)},
                                {"D_hat", detail::matrix_json(d.D_hat)},
                                {"per_lag", lags}};
        }
        rows.push_back(r);
    }
    j["orders"] = rows;
    return j;
}

}  // namespace apgarch
