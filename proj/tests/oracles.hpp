#pragma once

// Test-only reference computations. Nothing here calls into the library's
// filter, score or Lyapunov code paths.

#include "apgarch/estimation.hpp"
#include "apgarch/model.hpp"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace oracle {

/// Plain restatement of the APGARCH recursion with an explicit presample.
/// Returns log zeta_t^2 for t = 1..n.
inline std::vector<double> log_zeta2(const std::vector<double>& eps, const apgarch::ParamVector& th,
                                     const std::vector<double>& pre_eps, const std::vector<double>& pre_h) {
    const int p = static_cast<int>(th.beta.size());
    const int q = static_cast<int>(th.alpha_plus.size());
    const int n = static_cast<int>(eps.size());
    auto e_at = [&](int t) { return t >= 1 ? eps[t - 1] : pre_eps[-t]; };  // t <= 0 -> pre_eps[0] = eps_0
    std::vector<double> h(n + 1, 0.0);
    auto h_at = [&](int t) { return t >= 1 ? h[t] : pre_h[-t]; };
    std::vector<double> out(n);
    for (int t = 1; t <= n; ++t) {
        double v = th.omega;
        for (int i = 1; i <= q; ++i) {
            const double e = e_at(t - i);
            const double plus = std::max(0.0, e);
            const double minus = std::min(0.0, e);
            if (plus > 0) v += th.alpha_plus[i - 1] * std::pow(plus, th.tau);
            if (minus < 0) v += th.alpha_minus[i - 1] * std::pow(-minus, th.tau);
        }
        for (int j = 1; j <= p; ++j) v += th.beta[j - 1] * h_at(t - j);
        h[t] = v;
        out[t - 1] = std::log(std::pow(v, 2.0 / th.tau));
    }
    return out;
}

/// Presample for the "mean" scheme: eps = 0, zeta^tau = omega / (1 - sum beta).
inline std::vector<double> log_zeta2_mean_init(const std::vector<double>& eps, const apgarch::ParamVector& th) {
    double bsum = 0.0;
    for (double b : th.beta) bsum += b;
    return log_zeta2(eps, th, std::vector<double>(th.alpha_plus.size(), 0.0),
                     std::vector<double>(th.beta.size(), th.omega / (1.0 - bsum)));
}

/// Random interior parameter point: omega, alpha in [0.02, 0.2], sum(beta)
/// at most 0.8, tau in [0.6, 2.5].
inline apgarch::ParamVector random_interior(const apgarch::ModelOrder& order, apgarch::RngStream& rng) {
    apgarch::ParamVector p;
    p.order = order;
    p.omega = 0.02 + 0.18 * rng.uniform();
    for (int i = 0; i < order.q; ++i) {
        p.alpha_plus.push_back(0.02 + 0.18 * rng.uniform() / order.q);
        p.alpha_minus.push_back(0.02 + 0.18 * rng.uniform() / order.q);
    }
    for (int j = 0; j < order.p; ++j) p.beta.push_back((0.1 + 0.7 * rng.uniform()) / order.p);
    p.tau = 0.6 + 1.9 * rng.uniform();
    return p;
}

/// Worst ratio |analytic - fd| / (1e-5 |fd| + 1e-8) over all t and coordinates,
/// with central differences of the plain recursion (mean presample). A value
/// below 1 means every coordinate passes.
inline double score_fd_worst_ratio(std::span<const double> series, const apgarch::ParamVector& th,
                                   const apgarch::Matrix& dlog_zeta2, double step = 1e-6) {
    const std::vector<double> eps(series.begin(), series.end());
    const apgarch::Vector base = th.flat();
    double worst = 0.0;
    for (int k = 0; k < base.size(); ++k) {
        apgarch::Vector up = base, dn = base;
        up(k) += step;
        dn(k) -= step;
        const auto fu = log_zeta2_mean_init(eps, apgarch::ParamVector::from_flat(th.order, up));
        const auto fl = log_zeta2_mean_init(eps, apgarch::ParamVector::from_flat(th.order, dn));
        for (std::size_t t = 0; t < eps.size(); ++t) {
            const double fd = (fu[t] - fl[t]) / (2.0 * step);
            const double an = dlog_zeta2(static_cast<Eigen::Index>(t), k);
            worst = std::max(worst, std::abs(an - fd) / (1e-5 * std::abs(fd) + 1e-8));
        }
    }
    return worst;
}

/// Scalar Monte Carlo value of E log(beta + a+ (eta+)^d + a- (-eta-)^d) using
/// the standard library's Student-t generator.
struct ScalarLyapunov {
    double mean = 0.0;
    double standard_error = 0.0;
};

inline ScalarLyapunov scalar_lyapunov(double alpha_plus, double alpha_minus, double beta, double delta, double nu,
                                      std::size_t draws, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::student_t_distribution<double> t(nu);
    const double scale = std::sqrt((nu - 2.0) / nu);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double eta = t(gen) * scale;
        const double v = std::log(beta + alpha_plus * std::pow(std::max(eta, 0.0), delta) +
                                  alpha_minus * std::pow(std::max(-eta, 0.0), delta));
        s += v;
        s2 += v * v;
    }
    const double m = s / static_cast<double>(draws);
    const double var = s2 / static_cast<double>(draws) - m * m;
    return {m, std::sqrt(var / static_cast<double>(draws))};
}

}  // namespace oracle
