#include <catch_amalgamated.hpp>

#include "apgarch/config.hpp"
#include "apgarch/experiments.hpp"

#include <cmath>
#include <limits>
#include <string>

using namespace apgarch;

namespace {

McConfig small_size_config(std::size_t replications) {
    McConfig c;
    c.dgp = ParamVector::make(0.04, {0.02}, {0.13}, {0.85}, 1.0);
    c.fit_order = c.dgp.order;
    c.n = 500;
    c.n_replications = replications;
    c.m_values = {2, 4, 6};
    c.alpha_levels = {0.01, 0.05, 0.1};
    c.master_seed = 17;
    return c;
}

McTable synthetic_table(int variant) {
    McTable t;
    t.config.dgp_order = {1, 2};
    t.config.dgp_params = {0.04, 0.02, 0.005, 0.13, 0.05, 0.6, 1.0};
    t.config.innovations = "student_t(9)";
    t.config.fit_order = {0, 1};
    t.config.sample_size = 5000;
    t.config.replications = 100;
    t.config.master_seed = variant == 2 ? std::numeric_limits<std::uint64_t>::max() : 42;
    t.config.burn_in = 1000;
    if (variant == 1) t.config.dgp_params[0] = 0.1 + 0.2;
    if (variant == 2) t.config.dgp_params[6] = 1e-300;
    t.m_values = {2, 4};
    t.alpha_levels = {0.01, variant == 1 ? 1.0 / 3.0 : 0.05};
    t.n_successful = 97;
    t.n_failed_fits = 3;
    t.rejections = {{95, 96}, {97, 97}};
    return t;
}

std::string config_error_path(const std::string& doc) {
    try {
        experiment_from_json(nlohmann::json::parse(doc));
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<none>";
}

}  // namespace

TEST_CASE("a one-replication study is well formed", "[experiments]") {
    auto c = small_size_config(1);
    const auto t = run_size_study(c);
    REQUIRE(t.n_successful + t.n_failed_fits == 1);
    REQUIRE(t.rejections.size() == 3);
    for (std::size_t a = 0; a < 3; ++a) {
        REQUIRE(t.rejections[a].size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            const double f = t.frequency(a, k);
            if (t.n_successful == 1) REQUIRE((f == 0.0 || f == 1.0));
        }
    }
    REQUIRE(t.config.replications == 1);
}

TEST_CASE("study results do not depend on the worker count", "[experiments][property]") {
    auto c = small_size_config(24);
    c.keep_per_replication = true;
    const auto one = run_size_study(c);
    c.workers = 3;
    const auto three = run_size_study(c);
    c.workers = 24;
    const auto many = run_size_study(c);
    REQUIRE(one.same_rendering(three));
    REQUIRE(one.same_rendering(many));
    for (const auto format : {TableFormat::Text, TableFormat::Csv, TableFormat::Json})
        REQUIRE(emit_table(one, format) == emit_table(three, format));
    for (std::size_t r = 0; r < 24; ++r) {
        const auto& a = (*one.per_replication)[r];
        const auto& b = (*three.per_replication)[r];
        REQUIRE(a.index == r);
        REQUIRE(a.ok == b.ok);
        for (std::size_t k = 0; k < a.statistics.size(); ++k)
            REQUIRE((a.statistics[k] == b.statistics[k] || (std::isnan(a.statistics[k]) && std::isnan(b.statistics[k]))));
    }
}

TEST_CASE("rejection frequencies are coherent", "[experiments][property]") {
    auto c = small_size_config(30);
    c.keep_per_replication = true;
    const auto t = run_size_study(c);
    REQUIRE(t.n_successful + t.n_failed_fits == 30);
    for (std::size_t k = 0; k < t.m_values.size(); ++k) {
        // Nested rejection regions: nondecreasing in alpha.
        for (std::size_t a = 1; a < t.alpha_levels.size(); ++a) REQUIRE(t.rejections[a][k] >= t.rejections[a - 1][k]);
        for (std::size_t a = 0; a < t.alpha_levels.size(); ++a) {
            REQUIRE(t.frequency(a, k) ==
                    static_cast<double>(t.rejections[a][k]) / static_cast<double>(t.n_successful));
            std::size_t count = 0;
            const double crit = chi2_quantile(1.0 - t.alpha_levels[a], t.m_values[k]);
            for (const auto& rec : *t.per_replication) count += rec.ok && rec.statistics[k] > crit;
            REQUIRE(count == t.rejections[a][k]);
        }
    }
    REQUIRE(t.frequency_at(4, 0.05) == t.frequency(1, 1));
    REQUIRE_THROWS_AS(t.frequency_at(3, 0.05), PreconditionError);
}

TEST_CASE("failed replications are counted and can abort the study", "[experiments]") {
    auto c = small_size_config(5);
    c.fit_options.max_iterations = 1;
    c.fit_options.tau_grid = {1.0};
    REQUIRE_THROWS_AS(run_size_study(c), StudyAborted);
    c.max_failure_fraction = 1.0;
    c.keep_per_replication = true;
    const auto t = run_size_study(c);
    REQUIRE(t.n_failed_fits == 5);
    REQUIRE(t.n_successful == 0);
    REQUIRE(std::isnan(t.frequency(0, 0)));
    for (const auto& rec : *t.per_replication) {
        REQUIRE_FALSE(rec.ok);
        REQUIRE(rec.failure == "fit did not converge");
    }
}

TEST_CASE("size and power studies check the fitted order", "[experiments]") {
    auto c = small_size_config(2);
    c.fit_order = {0, 1};
    REQUIRE_THROWS_AS(run_size_study(c), PreconditionError);
    c.fit_order = c.dgp.order;
    REQUIRE_THROWS_AS(run_power_study(c), PreconditionError);
}

TEST_CASE("configuration validation", "[experiments]") {
    auto c = small_size_config(2);
    c.m_values = {4, 2};
    REQUIRE_THROWS_AS(run_size_study(c), PreconditionError);
    c.m_values = {2, 50};
    REQUIRE_THROWS_AS(run_size_study(c), PreconditionError);
    c.m_values = {2};
    c.alpha_levels = {0.0};
    REQUIRE_THROWS_AS(run_size_study(c), PreconditionError);
    c.alpha_levels = {0.05};
    c.n_replications = 0;
    REQUIRE_THROWS_AS(run_size_study(c), PreconditionError);
}

TEST_CASE("tables round trip through every format", "[experiments][io]") {
    auto c = small_size_config(6);
    const McTable real = run_size_study(c);
    for (const auto format : {TableFormat::Text, TableFormat::Csv, TableFormat::Json}) {
        for (const McTable& t : {real, synthetic_table(0), synthetic_table(1), synthetic_table(2)}) {
            const std::string doc = emit_table(t, format);
            const McTable back = parse_table(doc, format);
            INFO(doc);
            REQUIRE(back.same_rendering(t));
            REQUIRE(emit_table(back, format) == doc);
        }
    }
}

TEST_CASE("malformed table documents are rejected", "[experiments][io]") {
    REQUIRE_THROWS_AS(parse_table("not a table", TableFormat::Text), DataError);
    REQUIRE_THROWS_AS(parse_table("{\"config\": 1}", TableFormat::Json), DataError);
    REQUIRE_THROWS_AS(parse_table("# x=1\na,b\n", TableFormat::Csv), DataError);
}

TEST_CASE("experiment documents fill defaults by study kind", "[experiments][config]") {
    const auto size = experiment_from_json(nlohmann::json::parse(R"({
        "dgp": {"order": [1, 1], "omega": 0.04, "alpha_plus": [0.02], "alpha_minus": [0.13],
                "beta": [0.85], "delta": 1.0}
    })"));
    REQUIRE(size.kind == StudyKind::Size);
    REQUIRE(size.config.n == 500);
    REQUIRE(size.config.n_replications == 500);
    REQUIRE(size.config.fit_order == size.config.dgp.order);

    const auto power = experiment_from_json(nlohmann::json::parse(R"({
        "dgp": {"order": [1, 2], "omega": 0.04, "alpha_plus": [0.02, 0.005], "alpha_minus": [0.13, 0.05],
                "beta": [0.6], "tau": 1.0},
        "fit_order": [0, 1], "innovations": {"kind": "student_t", "nu": 9}, "seed": 7, "workers": 2,
        "m_values": [2, 4], "alpha_levels": [0.05], "fit": {"init": "zeros", "tau_grid": [1.0, 2.0]}
    })"));
    REQUIRE(power.kind == StudyKind::Power);
    REQUIRE(power.config.n == 5000);
    REQUIRE(power.config.n_replications == 100);
    REQUIRE(power.config.master_seed == 7);
    REQUIRE(power.config.workers == 2);
    REQUIRE(power.config.fit_options.tau_grid.size() == 2);
    REQUIRE(power.config.fit_options.init.kind == InitScheme::Kind::Omega);
}

TEST_CASE("experiment document errors name the offending field", "[experiments][config]") {
    const std::string dgp =
        R"("dgp": {"order": [1, 1], "omega": 0.04, "alpha_plus": [0.02], "alpha_minus": [0.13], "beta": [0.85], "delta": 1.0})";
    REQUIRE(config_error_path("{}") == "dgp");
    REQUIRE(config_error_path(R"({"dgp": {"order": [1, 1], "omega": 0.04, "alpha_plus": [-0.02],
        "alpha_minus": [0.13], "beta": [0.85], "delta": 1.0}})") == "dgp.alpha_plus[0]");
    REQUIRE(config_error_path(R"({"dgp": {"order": [1, 1], "omega": 0.04, "alpha_plus": [0.02, 0.1],
        "alpha_minus": [0.13], "beta": [0.85], "delta": 1.0}})") == "dgp.alpha_plus");
    REQUIRE(config_error_path(R"({"dgp": {"order": [1, 1], "omega": 0.04, "alpha_plus": [0.02],
        "alpha_minus": [0.13], "beta": [0.85]}})") == "dgp.tau");
    REQUIRE(config_error_path("{" + dgp + R"(, "m_values": [4, 2]})") == "m_values[1]");
    REQUIRE(config_error_path("{" + dgp + R"(, "alpha_levels": [0.05, 1.5]})") == "alpha_levels[1]");
    REQUIRE(config_error_path("{" + dgp + R"(, "innovations": {"kind": "student_t", "nu": 3}})") == "innovations.nu");
    REQUIRE(config_error_path("{" + dgp + R"(, "study": "power"})") == "fit_order");
    REQUIRE(config_error_path("{" + dgp + R"(, "fit": {"init": "median"}})") == "fit.init");
    REQUIRE(config_error_path("{" + dgp + R"(, "sample_size": 60})") == "m_values");
}
