// apgarch: fit-and-test reports, simulation, stationarity checks and Monte
// Carlo studies for APGARCH(p,q) models with estimated power.
//
// Exit codes: 0 success, 1 usage error, 2 data/numerical error.

#include "apgarch/apgarch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace apgarch;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

class UsageError : public Error {
public:
    using Error::Error;
};

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(detail::parse_double(tok));
        } catch (const DataError&) {
            throw UsageError(what + ": '" + tok + "' is not a number");
        }
    }
    if (out.empty()) throw UsageError(what + ": empty list");
    return out;
}

ModelOrder parse_order_flag(const std::string& s) {
    try {
        const ModelOrder o = detail::parse_order(s);
        validate_order(o);
        return o;
    } catch (const Error&) {
        throw UsageError("--order expects p,q with p >= 0 and q >= 1, got '" + s + "'");
    }
}

ParamVector params_from_flags(const std::string& order_s, const std::string& params_s) {
    const ModelOrder order = parse_order_flag(order_s);
    const auto values = parse_list(params_s, "--params");
    if (values.size() != static_cast<std::size_t>(order.n_params()))
        throw UsageError("--params needs " + std::to_string(order.n_params()) +
                         " values (omega, alpha+, alpha-, beta, tau) for order " + to_string(order));
    Vector v(order.n_params());
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
    ParamVector p = ParamVector::from_flat(order, v);
    validate_params(p);
    return p;
}

InnovationSpec innovations_from_flags(const std::string& kind, double nu) {
    if (kind == "normal") return InnovationSpec::normal();
    if (kind == "student_t" || kind == "t") {
        InnovationSpec s = InnovationSpec::student_t(nu);
        s.validate();
        return s;
    }
    throw UsageError("--innovations must be normal or student_t");
}

InitScheme init_from_flag(const std::string& s) {
    if (s == "mean") return InitScheme::mean();
    if (s == "zeros") return InitScheme::omega();
    throw UsageError("--init must be mean or zeros");
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << content;
}

// ---------------------------------------------------------------------------

struct FitTestArgs {
    std::string data;
    std::string column = "0";
    std::string delimiter = ",";
    std::string transform = "log_returns";
    double scale = 100.0;
    std::vector<std::string> orders;
    int m_max = 12;
    double alpha = 0.05;
    std::string init = "mean";
    std::string tau_grid = "0.8,1,1.5,2,2.5";
    int max_iter = 500;
    std::uint64_t seed = 0;
    std::string json;
};

int cmd_fit_test(const FitTestArgs& a) {
    io::DatasetSpec spec;
    spec.path = a.data;
    spec.column = a.column;
    if (a.delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    spec.delimiter = a.delimiter == "\\t" ? '\t' : a.delimiter[0];
    spec.transform = [&] {
        try {
            return io::parse_transform(a.transform);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }();
    spec.scale = a.scale;
    if (a.m_max < 1) throw UsageError("--m-max must be positive");
    if (!(a.alpha > 0.0 && a.alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");

    std::vector<ModelOrder> orders;
    for (const auto& s : a.orders) orders.push_back(parse_order_flag(s));
    if (orders.empty()) orders = default_order_grid();
    FitOptions options;
    options.init = init_from_flag(a.init);
    options.tau_grid = parse_list(a.tau_grid, "--tau-grid");
    for (double t : options.tau_grid)
        if (!(t > 0.0)) throw UsageError("--tau-grid values must be positive");
    if (a.max_iter <= 0) throw UsageError("--max-iter must be positive");
    options.max_iterations = a.max_iter;

    const Series series = io::load_series(spec);
    const AdequacyReport rep = fit_test_report(
        series, orders, a.m_max, options,
        {spec.path, spec.column, io::to_string(spec.transform), spec.scale, series.size()});
    std::cout << render_adequacy_text(rep, a.alpha);
    if (!a.json.empty()) write_file(a.json, adequacy_json(rep).dump(2) + "\n");
    return rep.n_succeeded() > 0 ? 0 : kExitData;
}

struct SimulateArgs {
    std::string order = "1,1";
    std::string params;
    std::size_t n = 500;
    std::size_t burn_in = kDefaultBurnIn;
    std::string innovations = "student_t";
    double nu = 9.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
    const ParamVector params = params_from_flags(a.order, a.params);
    const InnovationSpec innov = innovations_from_flags(a.innovations, a.nu);
    if (a.n == 0) throw UsageError("--n must be positive");
    const SimulationResult sim = simulate(params, a.n, a.burn_in, innov, a.seed, a.stream);
    io::write_simulation_csv(a.out, sim.series, sim.path);
    std::cout << "wrote " << a.n << " observations to " << a.out << "\n";
    return 0;
}

struct StationarityArgs {
    std::string order = "1,1";
    std::string params;
    std::string innovations = "student_t";
    double nu = 9.0;
    std::size_t steps = 1000000;
    std::uint64_t seed = 0;
    std::string json;
};

int cmd_stationarity(const StationarityArgs& a) {
    const ParamVector params = params_from_flags(a.order, a.params);
    const InnovationSpec innov = innovations_from_flags(a.innovations, a.nu);
    if (a.steps < 10000) throw UsageError("--steps must be at least 10000");
    const StationarityVerdict v = lyapunov_exponent(params, innov, a.steps, a.seed);
    std::printf("top Lyapunov exponent  %.6f\n", v.gamma_estimate);
    std::printf("standard error         %.6f\n", v.standard_error);
    std::printf("steps                  %zu\n", v.n_steps);
    std::printf("verdict                %s\n", to_string(v.verdict).c_str());
    if (!a.json.empty()) {
        nlohmann::json j{{"schema", 1},
                         {"kind", "stationarity"},
                         {"gamma_estimate", v.gamma_estimate},
                         {"standard_error", v.standard_error},
                         {"n_steps", v.n_steps},
                         {"verdict", to_string(v.verdict)}};
        write_file(a.json, j.dump(2) + "\n");
    }
    return 0;
}

struct McArgs {
    std::string config;
    std::size_t replications = 0;
    std::size_t sample_size = 0;
    unsigned workers = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<double> alpha;
    bool full_scale = false;
    bool per_replication = false;
    std::string format = "text";
    std::string json;
};

int cmd_mc(const McArgs& a) {
    ExperimentSpec spec = load_experiment(a.config);
    McConfig& c = spec.config;
    if (a.full_scale) c.n_replications = 1000;
    if (a.replications > 0) c.n_replications = a.replications;
    if (a.sample_size > 0) c.n = a.sample_size;
    if (a.workers > 0) c.workers = a.workers;
    if (a.seed_set) c.master_seed = a.seed;
    if (!a.alpha.empty()) {
        for (double v : a.alpha)
            if (!(v > 0.0 && v < 1.0)) throw UsageError("--alpha values must lie in (0,1)");
        c.alpha_levels = a.alpha;
    }
    c.keep_per_replication = a.per_replication;
    try {
        c.validate();
    } catch (const PreconditionError& e) {
        throw UsageError(e.what());
    }
    TableFormat fmt = TableFormat::Text;
    if (a.format == "csv") fmt = TableFormat::Csv;
    else if (a.format == "json") fmt = TableFormat::Json;
    else if (a.format != "text") throw UsageError("--format must be text, csv or json");

    const McTable table = run_experiment(spec);
    std::cout << emit_table(table, fmt);
    if (!a.json.empty()) write_file(a.json, emit_table(table, TableFormat::Json));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"APGARCH(p,q) with estimated power: QML fitting, portmanteau adequacy tests, "
                 "simulation, stationarity and Monte Carlo studies"};
    app.require_subcommand(1);

    FitTestArgs ft;
    auto* fit_cmd = app.add_subcommand("fit-test", "fit candidate orders and report portmanteau p-values");
    fit_cmd->add_option("--data", ft.data, "CSV file, one observation per row")->required();
    fit_cmd->add_option("--column", ft.column, "column name or zero-based index");
    fit_cmd->add_option("--delimiter", ft.delimiter, "field delimiter");
    fit_cmd->add_option("--transform", ft.transform, "none | log_returns | pct_returns");
    fit_cmd->add_option("--scale", ft.scale, "multiplier applied after the transform");
    fit_cmd->add_option("--order", ft.orders, "candidate order p,q (repeatable)");
    fit_cmd->add_option("--m-max", ft.m_max, "largest number of autocovariances");
    fit_cmd->add_option("--alpha", ft.alpha, "level used to flag rejections");
    fit_cmd->add_option("--init", ft.init, "presample scheme: mean | zeros");
    fit_cmd->add_option("--tau-grid", ft.tau_grid, "comma-separated starting powers");
    fit_cmd->add_option("--max-iter", ft.max_iter, "iterations per start");
    fit_cmd->add_option("--seed", ft.seed, "accepted for uniformity; fitting is deterministic");
    fit_cmd->add_option("--json", ft.json, "write the JSON report here");

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "simulate an APGARCH path to CSV (t, epsilon, zeta)");
    sim_cmd->add_option("--order", sa.order, "p,q");
    sim_cmd->add_option("--params", sa.params, "omega,alpha+...,alpha-...,beta...,tau")->required();
    sim_cmd->add_option("--n,--sample-size", sa.n, "observations kept");
    sim_cmd->add_option("--burn-in", sa.burn_in, "observations discarded");
    sim_cmd->add_option("--innovations", sa.innovations, "normal | student_t");
    sim_cmd->add_option("--nu", sa.nu, "Student-t degrees of freedom (> 4)");
    sim_cmd->add_option("--seed", sa.seed, "random seed");
    sim_cmd->add_option("--stream", sa.stream, "random stream id");
    sim_cmd->add_option("--out", sa.out, "output CSV path")->required();

    StationarityArgs st;
    auto* st_cmd = app.add_subcommand("stationarity", "estimate the top Lyapunov exponent");
    st_cmd->add_option("--order", st.order, "p,q");
    st_cmd->add_option("--params", st.params, "omega,alpha+...,alpha-...,beta...,tau")->required();
    st_cmd->add_option("--innovations", st.innovations, "normal | student_t");
    st_cmd->add_option("--nu", st.nu, "Student-t degrees of freedom (> 4)");
    st_cmd->add_option("--steps", st.steps, "matrix products");
    st_cmd->add_option("--seed", st.seed, "random seed");
    st_cmd->add_option("--json", st.json, "write the verdict as JSON");

    McArgs mc;
    auto* mc_cmd = app.add_subcommand("mc", "run a Monte Carlo size or power study");
    mc_cmd->add_option("--config", mc.config, "experiment JSON document")->required();
    mc_cmd->add_option("--replications", mc.replications, "override N");
    mc_cmd->add_option("--sample-size", mc.sample_size, "override n");
    mc_cmd->add_option("--workers", mc.workers, "parallel workers");
    auto* seed_opt = mc_cmd->add_option("--seed", mc.seed, "override master seed");
    mc_cmd->add_option("--alpha", mc.alpha, "override levels (repeatable)");
    mc_cmd->add_flag("--full-scale", mc.full_scale, "N = 1000 replications");
    mc_cmd->add_flag("--per-replication", mc.per_replication, "include per-replication statistics in JSON");
    mc_cmd->add_option("--format", mc.format, "text | csv | json");
    mc_cmd->add_option("--json", mc.json, "also write the JSON table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    mc.seed_set = seed_opt->count() > 0;

    try {
        if (*fit_cmd) return cmd_fit_test(ft);
        if (*sim_cmd) return cmd_simulate(sa);
        if (*st_cmd) return cmd_stationarity(st);
        if (*mc_cmd) return cmd_mc(mc);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConstraintViolation& e) {
        std::cerr << "error: invalid parameters: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: config " << e.what() << "\n";
        return kExitUsage;
    } catch (const NonFiniteVolatility& e) {
        std::cerr << "error: NonFiniteVolatility: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
