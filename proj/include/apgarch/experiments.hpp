#pragma once

// Monte Carlo size/power studies of the portmanteau test. Replication r draws
// its series from stream r of the master seed, so the table does not depend
// on how replications are scheduled across workers.

#include "apgarch/diagnostics.hpp"
#include "apgarch/errors.hpp"
#include "apgarch/estimation.hpp"
#include "apgarch/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace apgarch {

struct McConfig {
    ParamVector dgp;
    InnovationSpec innovations = InnovationSpec::student_t(9.0);
    ModelOrder fit_order;
    std::size_t n = 500;
    std::size_t n_replications = 500;
    std::vector<int> m_values{2, 4, 6, 8, 10, 12};
    std::vector<double> alpha_levels{0.01, 0.05};
    std::uint64_t master_seed = 1;
    std::size_t burn_in = kDefaultBurnIn;
    FitOptions fit_options;
    unsigned workers = 1;
    bool keep_per_replication = false;
    double max_failure_fraction = 0.2;

    void validate() const {
        validate_params(dgp);
        innovations.validate();
        validate_order(fit_order);
        if (n_replications == 0) throw PreconditionError("replications must be positive");
        if (m_values.empty()) throw PreconditionError("m_values must not be empty");
        if (!std::is_sorted(m_values.begin(), m_values.end()) ||
            std::adjacent_find(m_values.begin(), m_values.end()) != m_values.end())
            throw PreconditionError("m_values must be strictly ascending");
        if (m_values.front() < 1) throw PreconditionError("m_values must be positive");
        if (static_cast<double>(m_values.back()) >= static_cast<double>(n) / 10.0)
            throw PreconditionError("largest m must be below sample_size/10");
        if (alpha_levels.empty()) throw PreconditionError("alpha_levels must not be empty");
        for (double a : alpha_levels)
            if (!(a > 0.0 && a < 1.0)) throw PreconditionError("alpha levels must lie in (0,1)");
        if (n < static_cast<std::size_t>(10 * fit_order.n_params()))
            throw PreconditionError("sample_size too small for the fitted order");
    }
};

/// Configuration summary carried with a table.
struct ConfigEcho {
    ModelOrder dgp_order;
    std::vector<double> dgp_params;  // flat layout
    std::string innovations;
    ModelOrder fit_order;
    std::size_t sample_size = 0;
    std::size_t replications = 0;
    std::uint64_t master_seed = 0;
    std::size_t burn_in = 0;

    friend bool operator==(const ConfigEcho&, const ConfigEcho&) = default;
};

struct ReplicationRecord {
    std::size_t index = 0;
    bool ok = false;
    std::string failure;
    std::vector<double> statistics;  // one per m value; NaN when unavailable
};

struct McTable {
    ConfigEcho config;
    std::vector<int> m_values;
    std::vector<double> alpha_levels;
    std::vector<std::vector<std::size_t>> rejections;  // [alpha][m]
    std::size_t n_successful = 0;
    std::size_t n_failed_fits = 0;
    std::optional<std::vector<ReplicationRecord>> per_replication;

    double frequency(std::size_t alpha_idx, std::size_t m_idx) const {
        if (n_successful == 0) return std::numeric_limits<double>::quiet_NaN();
        return static_cast<double>(rejections.at(alpha_idx).at(m_idx)) / static_cast<double>(n_successful);
    }

    /// Frequency for an (m, alpha) pair present in the table.
    double frequency_at(int m, double alpha) const {
        const auto mi = std::find(m_values.begin(), m_values.end(), m);
        const auto ai = std::find(alpha_levels.begin(), alpha_levels.end(), alpha);
        if (mi == m_values.end() || ai == alpha_levels.end())
            throw PreconditionError("frequency_at: (m, alpha) not in table");
        return frequency(ai - alpha_levels.begin(), mi - m_values.begin());
    }

    /// Equality of everything that is rendered (per-replication detail excluded).
    bool same_rendering(const McTable& o) const {
        return config == o.config && m_values == o.m_values && alpha_levels == o.alpha_levels &&
               rejections == o.rejections && n_successful == o.n_successful &&
               n_failed_fits == o.n_failed_fits;
    }
};

/// One replication: simulate, fit, test. Failures are recorded, never thrown.
inline ReplicationRecord run_replication(const McConfig& config, std::size_t index) {
    ReplicationRecord rec;
    rec.index = index;
    rec.statistics.assign(config.m_values.size(), std::numeric_limits<double>::quiet_NaN());
    try {
        const SimulationResult sim = simulate(config.dgp, config.n, config.burn_in, config.innovations,
                                              config.master_seed, index);
        const FitResult fr = fit(sim.series, config.fit_order, config.fit_options);
        if (!fr.converged) {
            rec.failure = "fit did not converge";
            return rec;
        }
        if (fr.j_singular) {
            rec.failure = "J singular at the estimate";
            return rec;
        }
        const DiagnosticsReport rep = portmanteau_test(sim.series, fr, config.m_values.back());
        for (std::size_t k = 0; k < config.m_values.size(); ++k) {
            const auto& lag = rep.per_lag.at(config.m_values[k] - 1);
            if (!lag.statistic) {
                rec.failure = "D singular at m=" + std::to_string(config.m_values[k]);
                return rec;
            }
            rec.statistics[k] = *lag.statistic;
        }
        rec.ok = true;
    } catch (const Error& e) {
        rec.failure = e.what();
    }
    return rec;
}

namespace detail {

inline McTable run_study(const McConfig& config) {
    config.validate();
    const std::size_t total = config.n_replications;
    std::vector<ReplicationRecord> records(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next.fetch_add(1); r < total; r = next.fetch_add(1))
            records[r] = run_replication(config, r);
    };
    const unsigned n_workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(total)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }

    McTable table;
    table.config = {config.dgp.order, {}, to_string(config.innovations), config.fit_order, config.n,
                    config.n_replications, config.master_seed, config.burn_in};
    const Vector flat = config.dgp.flat();
    table.config.dgp_params.assign(flat.data(), flat.data() + flat.size());
    table.m_values = config.m_values;
    table.alpha_levels = config.alpha_levels;
    table.rejections.assign(config.alpha_levels.size(), std::vector<std::size_t>(config.m_values.size(), 0));

    std::vector<std::vector<double>> critical(config.alpha_levels.size());
    for (std::size_t a = 0; a < config.alpha_levels.size(); ++a)
        for (int m : config.m_values) critical[a].push_back(chi2_quantile(1.0 - config.alpha_levels[a], m));

    for (const auto& rec : records) {
        if (!rec.ok) {
            ++table.n_failed_fits;
            continue;
        }
        ++table.n_successful;
        for (std::size_t a = 0; a < config.alpha_levels.size(); ++a)
            for (std::size_t k = 0; k < config.m_values.size(); ++k)
                if (rec.statistics[k] > critical[a][k]) ++table.rejections[a][k];
    }
    if (static_cast<double>(table.n_failed_fits) > config.max_failure_fraction * static_cast<double>(total))
        throw StudyAborted(std::to_string(table.n_failed_fits) + " of " + std::to_string(total) +
                           " replications failed");
    if (config.keep_per_replication) table.per_replication = std::move(records);
    return table;
}

}  // namespace detail

/// Null hypothesis true: the fitted order is the data-generating order.
inline McTable run_size_study(const McConfig& config) {
    if (!(config.fit_order == config.dgp.order))
        throw PreconditionError("size study requires fit_order equal to the DGP order");
    return detail::run_study(config);
}

/// Null hypothesis false: a different order is fitted to the DGP's data.
inline McTable run_power_study(const McConfig& config) {
    if (config.fit_order == config.dgp.order)
        throw PreconditionError("power study requires fit_order different from the DGP order");
    return detail::run_study(config);
}

// ---------------------------------------------------------------------------
// Rendering and parsing
// ---------------------------------------------------------------------------

enum class TableFormat { Text, Csv, Json };

namespace detail {

inline std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) throw DataError("not a number: '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("not an integer: '" + s + "'");
    return v;
}

inline ModelOrder parse_order(const std::string& s) {
    // "(p,q)" or "p,q"
    std::string t;
    for (char c : s)
        if (c != '(' && c != ')' && c != ' ') t += c;
    const auto comma = t.find(',');
    if (comma == std::string::npos) throw DataError("bad order '" + s + "'");
    return {static_cast<int>(parse_u64(t.substr(0, comma))), static_cast<int>(parse_u64(t.substr(comma + 1)))};
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(parse_double(tok));
    return out;
}

inline std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + shortest(v[i]);
    return out;
}

inline std::vector<std::pair<std::string, std::string>> echo_pairs(const McTable& t) {
    return {{"dgp_order", to_string(t.config.dgp_order)},
            {"dgp_params", join(t.config.dgp_params)},
            {"innovations", t.config.innovations},
            {"fit_order", to_string(t.config.fit_order)},
            {"sample_size", std::to_string(t.config.sample_size)},
            {"replications", std::to_string(t.config.replications)},
            {"master_seed", std::to_string(t.config.master_seed)},
            {"burn_in", std::to_string(t.config.burn_in)},
            {"successful", std::to_string(t.n_successful)},
            {"failed_fits", std::to_string(t.n_failed_fits)}};
}

inline void apply_echo(McTable& t, const std::string& key, const std::string& value) {
    if (key == "dgp_order") t.config.dgp_order = parse_order(value);
    else if (key == "dgp_params") t.config.dgp_params = parse_doubles(value);
    else if (key == "innovations") t.config.innovations = value;
    else if (key == "fit_order") t.config.fit_order = parse_order(value);
    else if (key == "sample_size") t.config.sample_size = parse_u64(value);
    else if (key == "replications") t.config.replications = parse_u64(value);
    else if (key == "master_seed") t.config.master_seed = parse_u64(value);
    else if (key == "burn_in") t.config.burn_in = parse_u64(value);
    else if (key == "successful") t.n_successful = parse_u64(value);
    else if (key == "failed_fits") t.n_failed_fits = parse_u64(value);
    else throw DataError("unknown table key '" + key + "'");
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string render_text(const McTable& t) {
    std::ostringstream os;
    os << "APGARCH portmanteau Monte Carlo study\n";
    for (const auto& [k, v] : echo_pairs(t)) {
        os << "  " << k;
        for (std::size_t pad = k.size(); pad < 14; ++pad) os << ' ';
        os << v << '\n';
    }
    os << "rejection frequency % (rejections)\n";
    os << "alpha";
    for (int m : t.m_values) {
        std::string h = "m=" + std::to_string(m);
        os << std::string(h.size() < 16 ? 16 - h.size() : 1, ' ') << h;
    }
    os << '\n';
    char cell[64];
    for (std::size_t a = 0; a < t.alpha_levels.size(); ++a) {
        os << shortest(t.alpha_levels[a]);
        for (std::size_t k = 0; k < t.m_values.size(); ++k) {
            std::snprintf(cell, sizeof cell, "%.1f (%zu)", 100.0 * t.frequency(a, k), t.rejections[a][k]);
            const std::string c(cell);
            os << std::string(c.size() < 16 ? 16 - c.size() : 1, ' ') << c;
        }
        os << '\n';
    }
    return os.str();
}

inline McTable parse_text(const std::string& doc) {
    McTable t;
    std::istringstream is(doc);
    std::string line;
    std::getline(is, line);  // title
    while (std::getline(is, line)) {
        if (line.rfind("rejection frequency", 0) == 0) break;
        const std::string s = trim(line);
        const auto sp = s.find_first_of(" \t");
        if (sp == std::string::npos) throw DataError("malformed table line '" + line + "'");
        apply_echo(t, s.substr(0, sp), trim(s.substr(sp)));
    }
    if (!std::getline(is, line)) throw DataError("missing table header");
    {
        std::istringstream hs(line);
        std::string tok;
        hs >> tok;  // "alpha"
        while (hs >> tok) t.m_values.push_back(static_cast<int>(parse_u64(tok.substr(2))));
    }
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        std::istringstream rs(line);
        std::string tok;
        rs >> tok;
        t.alpha_levels.push_back(parse_double(tok));
        std::vector<std::size_t> row;
        std::string pct, count;
        while (rs >> pct >> count) row.push_back(parse_u64(count.substr(1, count.size() - 2)));
        if (row.size() != t.m_values.size()) throw DataError("table row width mismatch");
        t.rejections.push_back(std::move(row));
    }
    return t;
}

inline std::string render_csv(const McTable& t) {
    std::ostringstream os;
    for (const auto& [k, v] : echo_pairs(t)) os << "# " << k << '=' << v << '\n';
    os << "alpha,m,rejections,successful,frequency\n";
    for (std::size_t a = 0; a < t.alpha_levels.size(); ++a)
        for (std::size_t k = 0; k < t.m_values.size(); ++k)
            os << shortest(t.alpha_levels[a]) << ',' << t.m_values[k] << ',' << t.rejections[a][k] << ','
               << t.n_successful << ',' << shortest(t.frequency(a, k)) << '\n';
    return os.str();
}

inline McTable parse_csv(const std::string& doc) {
    McTable t;
    std::istringstream is(doc);
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw DataError("malformed csv comment '" + line + "'");
            apply_echo(t, trim(line.substr(1, eq - 1)), line.substr(eq + 1));
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 5) throw DataError("csv row must have 5 fields: '" + line + "'");
        const double alpha = parse_double(f[0]);
        const int m = static_cast<int>(parse_u64(f[1]));
        auto ai = std::find(t.alpha_levels.begin(), t.alpha_levels.end(), alpha);
        if (ai == t.alpha_levels.end()) {
            t.alpha_levels.push_back(alpha);
            t.rejections.emplace_back();
            ai = t.alpha_levels.end() - 1;
        }
        if (ai == t.alpha_levels.begin() &&
            std::find(t.m_values.begin(), t.m_values.end(), m) == t.m_values.end())
            t.m_values.push_back(m);
        t.rejections[ai - t.alpha_levels.begin()].push_back(parse_u64(f[2]));
    }
    return t;
}

inline std::string render_json(const McTable& t) {
    nlohmann::json j;
    j["schema"] = 1;
    j["kind"] = "mc_table";
    nlohmann::json cfg;
    cfg["dgp_order"] = {t.config.dgp_order.p, t.config.dgp_order.q};
    cfg["dgp_params"] = t.config.dgp_params;
    cfg["innovations"] = t.config.innovations;
    cfg["fit_order"] = {t.config.fit_order.p, t.config.fit_order.q};
    cfg["sample_size"] = t.config.sample_size;
    cfg["replications"] = t.config.replications;
    cfg["master_seed"] = t.config.master_seed;
    cfg["burn_in"] = t.config.burn_in;
    j["config"] = cfg;
    j["successful"] = t.n_successful;
    j["failed_fits"] = t.n_failed_fits;
    j["m_values"] = t.m_values;
    j["alpha_levels"] = t.alpha_levels;
    j["rejections"] = t.rejections;
    nlohmann::json freq = nlohmann::json::array();
    for (std::size_t a = 0; a < t.alpha_levels.size(); ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < t.m_values.size(); ++k) row.push_back(t.frequency(a, k));
        freq.push_back(row);
    }
    j["rejection_freq"] = freq;
    if (t.per_replication) {
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& r : *t.per_replication) {
            nlohmann::json stats = nlohmann::json::array();
            for (double s : r.statistics) stats.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json());
            reps.push_back({{"index", r.index}, {"ok", r.ok}, {"failure", r.failure}, {"statistics", stats}});
        }
        j["per_replication"] = reps;
    }
    return j.dump(2) + "\n";
}

inline McTable parse_json(const std::string& doc) {
    McTable t;
    try {
        const auto j = nlohmann::json::parse(doc);
        const auto& cfg = j.at("config");
        t.config.dgp_order = {cfg.at("dgp_order").at(0).get<int>(), cfg.at("dgp_order").at(1).get<int>()};
        t.config.dgp_params = cfg.at("dgp_params").get<std::vector<double>>();
        t.config.innovations = cfg.at("innovations").get<std::string>();
        t.config.fit_order = {cfg.at("fit_order").at(0).get<int>(), cfg.at("fit_order").at(1).get<int>()};
        t.config.sample_size = cfg.at("sample_size").get<std::size_t>();
        t.config.replications = cfg.at("replications").get<std::size_t>();
        t.config.master_seed = cfg.at("master_seed").get<std::uint64_t>();
        t.config.burn_in = cfg.at("burn_in").get<std::size_t>();
        t.n_successful = j.at("successful").get<std::size_t>();
        t.n_failed_fits = j.at("failed_fits").get<std::size_t>();
        t.m_values = j.at("m_values").get<std::vector<int>>();
        t.alpha_levels = j.at("alpha_levels").get<std::vector<double>>();
        t.rejections = j.at("rejections").get<std::vector<std::vector<std::size_t>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid table json: ") + e.what());
    }
    return t;
}

}  // namespace detail

inline std::string emit_table(const McTable& table, TableFormat format) {
    switch (format) {
        case TableFormat::Text: return detail::render_text(table);
        case TableFormat::Csv: return detail::render_csv(table);
        case TableFormat::Json: return detail::render_json(table);
    }
    return {};
}

inline McTable parse_table(const std::string& document, TableFormat format) {
    switch (format) {
        case TableFormat::Text: return detail::parse_text(document);
        case TableFormat::Csv: return detail::parse_csv(document);
        case TableFormat::Json: return detail::parse_json(document);
    }
    return {};
}

}  // namespace apgarch
