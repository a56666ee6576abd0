#include <catch_amalgamated.hpp>

#include "apgarch/estimation.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <vector>

using namespace apgarch;
using Catch::Approx;

namespace {

ParamVector base11(double delta) { return ParamVector::make(0.04, {0.02}, {0.13}, {0.85}, delta); }

}  // namespace

TEST_CASE("objective hand value without dynamics", "[estimation][objective]") {
    const auto p = ParamVector::make(1.0, {0.0}, {0.0}, {0.0}, 2.0);
    const auto v = qml_objective(Series({2.0, 0.0}), p, InitScheme::mean(), true);
    REQUIRE(v.finite);
    REQUIRE(v.value == Approx(2.0));
    REQUIRE(v.per_obs.size() == 2);
    REQUIRE(v.per_obs[0] == Approx(4.0));
    REQUIRE(v.per_obs[1] == Approx(0.0).margin(1e-15));
}

TEST_CASE("objective equals the mean of its per-observation terms", "[estimation][objective]") {
    const auto p = base11(1.3);
    const auto sim = simulate(p, 700, 200, InnovationSpec::student_t(9.0), 4);
    const auto v = qml_objective(sim.series, p, InitScheme::mean(), true);
    const double mean = std::accumulate(v.per_obs.begin(), v.per_obs.end(), 0.0) / 700.0;
    REQUIRE(v.value == Approx(mean).epsilon(1e-13));
}

TEST_CASE("objective overflow is reported as +inf", "[estimation][objective]") {
    const auto p = ParamVector::make(1.0, {5.0}, {5.0}, {0.5}, 2.0);
    const auto v = qml_objective(Series(std::vector<double>(20, 1e200)), p);
    REQUIRE_FALSE(v.finite);
    REQUIRE(std::isinf(v.value));
}

TEST_CASE("objective in omega alone is minimized at the sample second moment", "[estimation][objective]") {
    RngStream rng(3, 0);
    std::vector<double> e(3000);
    for (auto& x : e) x = 1.7 * rng.normal();
    const double m2 = std::inner_product(e.begin(), e.end(), e.begin(), 0.0) / static_cast<double>(e.size());
    const Series s(e);
    for (double tau : {0.7, 1.0, 2.0, 2.6}) {
        const double w = std::pow(m2, tau / 2.0);
        const auto at = [&](double omega) {
            return qml_objective(s, ParamVector::make(omega, {0.0}, {0.0}, {}, tau)).value;
        };
        REQUIRE(at(w) < at(w * 1.001));
        REQUIRE(at(w) < at(w * 0.999));
        REQUIRE(at(w) == Approx(1.0 + std::log(m2)).epsilon(1e-12));
    }
}

TEST_CASE("true parameters dominate a joint perturbation", "[estimation][objective][property]") {
    const auto p0 = base11(1.5);
    Vector shifted = p0.flat();
    shifted.array() += 0.1;
    const auto p1 = ParamVector::from_flat(p0.order, shifted);
    int wins = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto sim = simulate(p0, 5000, 1000, InnovationSpec::student_t(9.0), 500, r);
        wins += qml_objective(sim.series, p0).value < qml_objective(sim.series, p1).value;
    }
    REQUIRE(wins >= 95);
}

TEST_CASE("score of zeta^tau in omega is one without beta", "[estimation][score]") {
    const auto p = ParamVector::make(0.3, {0.1, 0.05}, {0.2, 0.1}, {}, 1.4);
    const auto sim = simulate(p, 100, 50, InnovationSpec::normal(), 8);
    const auto sc = score_filter(sim.series, p);
    for (Eigen::Index t = 0; t < sc.dzeta_tau.rows(); ++t) REQUIRE(sc.dzeta_tau(t, 0) == 1.0);
}

TEST_CASE("log-volatility score is the scaled zeta^tau score", "[estimation][score]") {
    const auto p = ParamVector::make(0.1, {0.05, 0.03}, {0.1, 0.04}, {0.5, 0.2}, 1.2);
    const auto sim = simulate(p, 300, 100, InnovationSpec::student_t(9.0), 9);
    const auto sc = score_filter(sim.series, p);
    const auto path = volatility_filter(sim.series, p);
    const int d = p.order.n_params();
    for (Eigen::Index t = 0; t < sc.dzeta_tau.rows(); ++t) {
        const double h = path.zeta_tau[static_cast<std::size_t>(t)];
        for (int k = 0; k < d - 1; ++k)
            REQUIRE(sc.dlog_zeta2(t, k) == Approx(2.0 / p.tau * sc.dzeta_tau(t, k) / h).epsilon(1e-13));
        REQUIRE(sc.dlog_zeta2(t, d - 1) ==
                Approx(2.0 / p.tau * sc.dzeta_tau(t, d - 1) / h - 2.0 / (p.tau * p.tau) * std::log(h))
                    .epsilon(1e-12)
                    .margin(1e-14));
    }
}

TEST_CASE("score matches central finite differences at random interior points", "[estimation][score][property]") {
    RngStream rng(1234, 0);
    const std::vector<ModelOrder> orders{{1, 1}, {1, 2}, {2, 1}, {0, 1}, {0, 3}, {3, 2}};
    for (int trial = 0; trial < 30; ++trial) {
        const auto order = orders[static_cast<std::size_t>(trial) % orders.size()];
        const auto p = oracle::random_interior(order, rng);
        const auto sim = simulate(p, 200, 100, InnovationSpec::student_t(9.0), 77, static_cast<std::uint64_t>(trial));
        const auto sc = score_filter(sim.series, p);
        INFO("order " << to_string(order) << ", trial " << trial);
        REQUIRE(oracle::score_fd_worst_ratio(sim.series.values(), p, sc.dlog_zeta2) < 1.0);
    }
}

TEST_CASE("a zero observation contributes nothing to the tau derivative", "[estimation][score]") {
    const auto p = ParamVector::make(0.2, {0.3}, {0.4}, {}, 1.5);
    const Series s({1.3, 0.0, -0.8, 0.0, 2.0});
    const auto sc = score_filter(s, p);
    const int tau_col = p.order.n_params() - 1;
    // ARCH(1): zeta^tau_t depends on eps_{t-1} only.
    REQUIRE(sc.dzeta_tau(2, tau_col) == 0.0);
    REQUIRE(sc.dzeta_tau(4, tau_col) == 0.0);
    REQUIRE(sc.dzeta_tau(1, tau_col) == Approx(0.3 * std::log(1.3) * std::pow(1.3, 1.5)));
    REQUIRE(sc.dzeta_tau(3, tau_col) == Approx(0.4 * std::log(0.8) * std::pow(0.8, 1.5)));
}

TEST_CASE("objective gradient matches finite differences", "[estimation][score]") {
    const auto p = ParamVector::make(0.06, {0.03, 0.01}, {0.12, 0.04}, {0.7}, 1.4);
    const auto sim = simulate(p, 500, 200, InnovationSpec::student_t(9.0), 31);
    detail::QmlKernel kernel(sim.series, p.order, InitScheme::mean());
    Vector grad(p.order.n_params());
    kernel.objective(p, &grad);
    const Vector base = p.flat();
    for (int k = 0; k < base.size(); ++k) {
        Vector up = base, dn = base;
        up(k) += 1e-6;
        dn(k) -= 1e-6;
        const double fd = (qml_objective(sim.series, ParamVector::from_flat(p.order, up)).value -
                           qml_objective(sim.series, ParamVector::from_flat(p.order, dn)).value) /
                          2e-6;
        REQUIRE(std::abs(grad(k) - fd) <= 1e-5 * std::abs(fd) + 1e-7);
    }
}

TEST_CASE("box transform round trips and its pull-back is the chain rule", "[estimation][box]") {
    RngStream rng(6, 0);
    for (const ModelOrder order : {ModelOrder{0, 1}, ModelOrder{1, 1}, ModelOrder{3, 2}}) {
        const BoxTransform box(order);
        const auto p = oracle::random_interior(order, rng);
        const Vector u = box.to_unconstrained(p);
        const auto back = box.to_params(u);
        REQUIRE((back.flat() - p.flat()).cwiseAbs().maxCoeff() < 1e-12);

        const int d = order.n_params();
        Vector g(d);
        for (int k = 0; k < d; ++k) g(k) = rng.normal();
        const Vector pulled = box.pull_back(u, back, g);
        for (int k = 0; k < d; ++k) {
            Vector up = u, dn = u;
            up(k) += 1e-6;
            dn(k) -= 1e-6;
            const Vector dtheta = (box.to_params(up).flat() - box.to_params(dn).flat()) / 2e-6;
            REQUIRE(pulled(k) == Approx(g.dot(dtheta)).epsilon(1e-6).margin(1e-9));
        }
    }
}

TEST_CASE("box transform stays inside the box for extreme inputs", "[estimation][box]") {
    const BoxTransform box({2, 1});
    for (double v : {-50.0, 0.0, 50.0, 300.0}) {
        Vector u = Vector::Constant(6, v);
        const auto p = box.to_params(u);
        REQUIRE(p.beta_sum() < 1.0);
        for (double b : p.beta) REQUIRE(b >= kCoefficientFloor);
        for (double a : p.alpha_plus) REQUIRE(a >= kCoefficientFloor);
    }
}

TEST_CASE("fit of the degenerate model recovers the second moment", "[estimation][fit]") {
    RngStream rng(99, 0);
    std::vector<double> e(4000);
    for (auto& x : e) x = 0.8 * draw_standardized_t(rng, 9.0);
    const double m2 = std::inner_product(e.begin(), e.end(), e.begin(), 0.0) / static_cast<double>(e.size());
    const auto r = fit(Series(e), {0, 1});
    REQUIRE(r.converged);
    // Residual second moment is one at the optimum; with negligible alpha the
    // fitted constant level carries it.
    INFO("alpha+ " << r.params_hat.alpha_plus[0] << " alpha- " << r.params_hat.alpha_minus[0] << " tau "
                   << r.params_hat.tau);
    REQUIRE(std::pow(r.params_hat.omega, 2.0 / r.params_hat.tau) == Approx(m2).epsilon(0.01));
}

TEST_CASE("fit invariants on a simulated series", "[estimation][fit][property]") {
    const auto p0 = base11(1.5);
    const auto sim = simulate(p0, 3000, 1000, InnovationSpec::student_t(9.0), 2024);
    const auto r = fit(sim.series, p0.order);
    REQUIRE(r.converged);
    REQUIRE_FALSE(r.j_singular);
    REQUIRE(r.n_restarts_used == 5);
    const int d = p0.order.n_params();
    REQUIRE(r.J_hat.rows() == d);
    REQUIRE((r.J_hat - r.J_hat.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * r.J_hat.cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(r.J_hat);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-10 * r.J_hat.norm());
    REQUIRE(r.std_errors.size() == d);
    REQUIRE(r.std_errors.allFinite());

    double s2 = 0.0;
    for (double x : r.residuals) s2 += x * x;
    s2 /= static_cast<double>(r.residuals.size());
    REQUIRE(s2 == Approx(1.0).epsilon(0.02));
    REQUIRE(r.kappa_hat >= s2 * s2 * (1.0 - 1e-12));
    REQUIRE(r.kappa_hat >= 1.0 - 0.05);

    // Refitting is bit-identical.
    const auto again = fit(sim.series, p0.order);
    REQUIRE(again.params_hat.flat() == r.params_hat.flat());
    REQUIRE(again.objective == r.objective);
    REQUIRE(again.J_hat == r.J_hat);
}

TEST_CASE("fit of a constant series does not crash", "[estimation][fit]") {
    const Series s(std::vector<double>(200, 0.5));
    const auto r = fit(s, {1, 1});
    REQUIRE((!r.converged || r.at_boundary || r.j_singular));
}

TEST_CASE("fit enforces the sample size precondition", "[estimation][fit]") {
    RngStream rng(1, 0);
    std::vector<double> e(49);
    for (auto& x : e) x = rng.normal();
    REQUIRE_THROWS_AS(fit(Series(e), {1, 1}), PreconditionError);
    e.push_back(0.1);
    REQUIRE_NOTHROW(fit(Series(e), {1, 1}));
}
