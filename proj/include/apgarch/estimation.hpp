#pragma once

// Quasi-maximum-likelihood estimation of the APGARCH parameter including the
// power tau, with analytic score recursions and the asymptotic-covariance
// ingredients J and kappa.

#include "apgarch/errors.hpp"
#include "apgarch/model.hpp"
#include "apgarch/numerics.hpp"
#include "apgarch/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace apgarch {

struct QmlObjectiveValue {
    double value = 0.0;                 // (1/n) sum l_t, +inf when the filter overflowed
    std::vector<double> per_obs;        // l_t, filled on request
    bool finite = true;
};

/// Derivatives of the filter at one parameter, one row per observation.
struct ScorePath {
    Matrix dzeta_tau;   // d zeta_t^tau / d theta
    Matrix dlog_zeta2;  // (1/zeta_t^2) d zeta_t^2 / d theta
};

namespace detail {

/// Filter (and optionally its derivatives) over a fixed series with
/// precomputed log-magnitudes, reusable across parameter values.
class QmlKernel {
public:
    QmlKernel(const Series& series, const ModelOrder& order, const InitScheme& init)
        : order_(order), init_(init), n_(series.size()) {
        validate_order(order);
        const int q = order.q;
        // slots 0..q-1 hold presample eps_{1-q}..eps_0, then eps_1..eps_n
        eps_.resize(q + n_);
        for (int k = 0; k < q; ++k) eps_[k] = presample_eps(init, q - 1 - k);
        for (std::size_t t = 0; t < n_; ++t) eps_[q + t] = series[t];
        log_abs_.resize(eps_.size());
        for (std::size_t i = 0; i < eps_.size(); ++i)
            log_abs_[i] = eps_[i] != 0.0 ? std::log(std::abs(eps_[i])) : 0.0;
        eps2_.resize(n_);
        for (std::size_t t = 0; t < n_; ++t) eps2_[t] = series[t] * series[t];
        pos_.resize(eps_.size());
        neg_.resize(eps_.size());
        h_.resize(order.p + n_);
    }

    std::size_t size() const noexcept { return n_; }
    const ModelOrder& order() const noexcept { return order_; }

    /// Fills h_ (and dh_ when derivs) at params. Returns false when the
    /// recursion leaves the representable range.
    bool run(const ParamVector& params, bool derivs) {
        const int p = order_.p;
        const int q = order_.q;
        const int d = order_.n_params();
        const double tau = params.tau;
        for (std::size_t i = 0; i < eps_.size(); ++i) {
            const double mag = eps_[i] != 0.0 ? std::exp(tau * log_abs_[i]) : 0.0;
            pos_[i] = eps_[i] > 0.0 ? mag : 0.0;
            neg_[i] = eps_[i] < 0.0 ? mag : 0.0;
        }
        const double bsum = params.beta_sum();
        for (int k = 0; k < p; ++k) h_[k] = presample_zeta_tau(params, init_, p - 1 - k);
        if (derivs) {
            dh_.assign(static_cast<std::size_t>(p + n_) * d, 0.0);
            for (int k = 0; k < p; ++k) {
                double* row = &dh_[static_cast<std::size_t>(k) * d];
                if (init_.kind == InitScheme::Kind::Mean) {
                    row[0] = 1.0 / (1.0 - bsum);
                    for (int j = 0; j < p; ++j)
                        row[1 + 2 * q + j] = params.omega / ((1.0 - bsum) * (1.0 - bsum));
                } else if (init_.kind == InitScheme::Kind::Omega) {
                    row[0] = 1.0;
                }
            }
        }
        for (std::size_t t = 0; t < n_; ++t) {
            double v = params.omega;
            for (int i = 1; i <= q; ++i) {
                const std::size_t idx = q + t - i;
                v += params.alpha_plus[i - 1] * pos_[idx] + params.alpha_minus[i - 1] * neg_[idx];
            }
            for (int j = 1; j <= p; ++j) v += params.beta[j - 1] * h_[p + t - j];
            if (!(v <= kVolatilityCeiling) || !(v > 0.0)) return false;
            h_[p + t] = v;
            if (!derivs) continue;

            double* row = &dh_[(p + t) * d];
            row[0] = 1.0;
            double dtau = 0.0;
            for (int i = 1; i <= q; ++i) {
                const std::size_t idx = q + t - i;
                row[i] = pos_[idx];
                row[q + i] = neg_[idx];
                // log(eps+) = 0 when eps <= 0 and log(-eps-) = 0 when eps >= 0;
                // pos_/neg_ are already zero there.
                dtau += (params.alpha_plus[i - 1] * pos_[idx] + params.alpha_minus[i - 1] * neg_[idx]) *
                        log_abs_[idx];
            }
            for (int j = 1; j <= p; ++j) row[2 * q + j] = h_[p + t - j];
            row[d - 1] = dtau;
            for (int j = 1; j <= p; ++j) {
                const double b = params.beta[j - 1];
                const double* prev = &dh_[(p + t - j) * d];
                for (int k = 0; k < d; ++k) row[k] += b * prev[k];
            }
        }
        return true;
    }

    double h(std::size_t t) const { return h_[order_.p + t]; }
    const double* dh_row(std::size_t t) const { return &dh_[(order_.p + t) * order_.n_params()]; }
    double eps2(std::size_t t) const { return eps2_[t]; }

    /// Mean QML objective; gradient in theta coordinates when grad != nullptr.
    double objective(const ParamVector& params, Vector* grad) {
        if (!run(params, grad != nullptr)) return std::numeric_limits<double>::infinity();
        const int d = order_.n_params();
        const double tau = params.tau;
        const double two_over_tau = 2.0 / tau;
        double sum = 0.0;
        if (grad) grad->setZero(d);
        for (std::size_t t = 0; t < n_; ++t) {
            const double logh = std::log(h_[order_.p + t]);
            const double log_z2 = two_over_tau * logh;
            const double ratio = eps2_[t] * std::exp(-log_z2);
            sum += ratio + log_z2;
            if (grad) {
                const double w = 1.0 - ratio;
                const double* row = dh_row(t);
                const double scale = w * two_over_tau / h_[order_.p + t];
                for (int k = 0; k < d; ++k) (*grad)(k) += scale * row[k];
                (*grad)(d - 1) -= w * two_over_tau / tau * logh;
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n_);
        if (grad) *grad *= inv_n;
        const double value = sum * inv_n;
        return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
    }

private:
    ModelOrder order_;
    InitScheme init_;
    std::size_t n_;
    std::vector<double> eps_, log_abs_, eps2_, pos_, neg_, h_, dh_;
};

}  // namespace detail

/// (1/n) sum [eps_t^2 / zeta_t^2 + log zeta_t^2]. Overflow of the filter yields
/// value = +inf with finite = false.
inline QmlObjectiveValue qml_objective(const Series& series, const ParamVector& params,
                                       const InitScheme& init = InitScheme::mean(),
                                       bool keep_per_obs = false) {
    validate_params(params);
    detail::check_init(params, init);
    detail::QmlKernel kernel(series, params.order, init);
    QmlObjectiveValue out;
    if (!kernel.run(params, false)) {
        out.value = std::numeric_limits<double>::infinity();
        out.finite = false;
        return out;
    }
    double sum = 0.0;
    if (keep_per_obs) out.per_obs.resize(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double log_z2 = 2.0 / params.tau * std::log(kernel.h(t));
        const double l = kernel.eps2(t) * std::exp(-log_z2) + log_z2;
        sum += l;
        if (keep_per_obs) out.per_obs[t] = l;
    }
    out.value = sum / static_cast<double>(series.size());
    out.finite = std::isfinite(out.value);
    if (!out.finite) out.value = std::numeric_limits<double>::infinity();
    return out;
}

/// Analytic derivatives of zeta_t^tau and log zeta_t^2 with respect to theta.
inline ScorePath score_filter(const Series& series, const ParamVector& params,
                              const InitScheme& init = InitScheme::mean()) {
    validate_params(params);
    detail::check_init(params, init);
    detail::QmlKernel kernel(series, params.order, init);
    if (!kernel.run(params, true)) throw NonFiniteVolatility("score_filter: zeta^tau exceeded 1e300");
    const auto n = static_cast<Eigen::Index>(series.size());
    const int d = params.order.n_params();
    const double tau = params.tau;
    ScorePath out{Matrix(n, d), Matrix(n, d)};
    for (Eigen::Index t = 0; t < n; ++t) {
        const double h = kernel.h(t);
        const double* row = kernel.dh_row(t);
        for (int k = 0; k < d; ++k) {
            out.dzeta_tau(t, k) = row[k];
            out.dlog_zeta2(t, k) = 2.0 / tau * row[k] / h;
        }
        out.dlog_zeta2(t, d - 1) -= 2.0 / (tau * tau) * std::log(h);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Box reparameterization
// ---------------------------------------------------------------------------

inline constexpr double kCoefficientFloor = 1e-8;
inline constexpr double kBetaSumCeiling = 1.0 - 1e-6;

/// Smooth bijection between R^d and the estimation box:
///   omega = exp(u), tau = exp(u), alpha = floor + exp(u),
///   beta_j = floor + c * e_j / (1 + sum_k e_k) with e = exp(u) and
///   c = ceiling - p * floor, so sum(beta) < ceiling.
class BoxTransform {
public:
    explicit BoxTransform(const ModelOrder& order) : order_(order) {}

    ParamVector to_params(const Vector& u) const {
        Vector theta(u.size());
        const int q = order_.q;
        const int p = order_.p;
        theta(0) = std::exp(u(0));
        for (int k = 1; k <= 2 * q; ++k) theta(k) = kCoefficientFloor + std::exp(u(k));
        if (p > 0) {
            const Vector w = softmax_weights(u.segment(1 + 2 * q, p));
            const double c = kBetaSumCeiling - p * kCoefficientFloor;
            for (int j = 0; j < p; ++j) theta(1 + 2 * q + j) = kCoefficientFloor + c * w(j);
        }
        theta(u.size() - 1) = std::exp(u(u.size() - 1));
        return ParamVector::from_flat(order_, theta);
    }

    /// Inverse map; parameters at or outside the box are pulled just inside.
    Vector to_unconstrained(const ParamVector& params) const {
        const Vector theta = params.flat();
        const int q = order_.q;
        const int p = order_.p;
        Vector u(theta.size());
        u(0) = std::log(theta(0));
        for (int k = 1; k <= 2 * q; ++k) u(k) = std::log(std::max(theta(k) - kCoefficientFloor, 1e-12));
        if (p > 0) {
            const double c = kBetaSumCeiling - p * kCoefficientFloor;
            Vector r(p);
            for (int j = 0; j < p; ++j)
                r(j) = std::max(theta(1 + 2 * q + j) - kCoefficientFloor, 1e-12) / c;
            double rest = 1.0 - r.sum();
            if (rest < 1e-12) {
                r *= (1.0 - 1e-6) / r.sum();
                rest = 1.0 - r.sum();
            }
            for (int j = 0; j < p; ++j) u(1 + 2 * q + j) = std::log(r(j) / rest);
        }
        u(theta.size() - 1) = std::log(theta(theta.size() - 1));
        return u;
    }

    /// grad_u = (d theta / d u)' grad_theta.
    Vector pull_back(const Vector& u, const ParamVector& params, const Vector& grad_theta) const {
        const int q = order_.q;
        const int p = order_.p;
        const Eigen::Index last = u.size() - 1;
        Vector g(u.size());
        g(0) = grad_theta(0) * params.omega;
        for (int k = 1; k <= 2 * q; ++k) g(k) = grad_theta(k) * std::exp(u(k));
        if (p > 0) {
            const Vector w = softmax_weights(u.segment(1 + 2 * q, p));
            const double c = kBetaSumCeiling - p * kCoefficientFloor;
            const Vector gb = grad_theta.segment(1 + 2 * q, p);
            const double wg = w.dot(gb);
            for (int k = 0; k < p; ++k) g(1 + 2 * q + k) = c * w(k) * (gb(k) - wg);
        }
        g(last) = grad_theta(last) * params.tau;
        return g;
    }

private:
    // w_j = e_j / (1 + sum e), evaluated without overflow.
    static Vector softmax_weights(const Vector& u) {
        const double m = std::max(0.0, u.maxCoeff());
        Vector e = (u.array() - m).exp();
        const double denom = std::exp(-m) + e.sum();
        return e / denom;
    }

    ModelOrder order_;
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitOptions {
    std::vector<double> tau_grid{0.8, 1.0, 1.5, 2.0, 2.5};
    int max_iterations = 500;
    double ftol = 1e-10;
    double gtol = 1e-6;
    InitScheme init = InitScheme::mean();
};

struct FitResult {
    ParamVector params_hat;
    double objective = std::numeric_limits<double>::infinity();
    double kappa_hat = 0.0;
    Matrix J_hat;
    Vector std_errors;            // empty when J_hat is singular
    std::vector<double> residuals;
    std::vector<double> zeta;
    ScorePath score;              // at params_hat, reused by the portmanteau test
    InitScheme init;
    bool converged = false;
    bool j_singular = false;
    double j_condition = 0.0;
    bool at_boundary = false;     // some alpha/beta sits at the floor
    int n_restarts_used = 0;
    int iterations = 0;           // of the selected start
    double gradient_max_norm = 0.0;
};

/// Multi-start QMLE over the box. Never throws for numerical trouble in the
/// data; failure is reported through `converged`.
inline FitResult fit(const Series& series, const ModelOrder& order, const FitOptions& options = {}) {
    validate_order(order);
    const int d = order.n_params();
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(10 * d))
        throw PreconditionError("fit: need n >= " + std::to_string(10 * d) + " observations for order " +
                                to_string(order));
    if (options.tau_grid.empty()) throw PreconditionError("fit: empty tau grid");
    detail::check_init(ParamVector{}, options.init);

    detail::QmlKernel kernel(series, order, options.init);
    const BoxTransform box(order);
    Vector grad_theta(d);
    ObjectiveWithGradient fn = [&](const Vector& u, Vector& grad_u) {
        const ParamVector params = box.to_params(u);
        if (!std::isfinite(params.tau) || !std::isfinite(params.omega))
            return std::numeric_limits<double>::infinity();
        const double f = kernel.objective(params, &grad_theta);
        if (!std::isfinite(f) || !grad_theta.allFinite()) return std::numeric_limits<double>::infinity();
        grad_u = box.pull_back(u, params, grad_theta);
        return f;
    };
    BfgsOptions bopt;
    bopt.max_iterations = options.max_iterations;
    bopt.ftol = options.ftol;
    bopt.gtol = options.gtol;

    std::optional<BfgsResult> best;
    double best_tau = 0.0;
    FitResult out;
    out.init = options.init;
    for (double tau0 : options.tau_grid) {
        if (!(tau0 > 0.0)) throw PreconditionError("fit: tau grid values must be positive");
        double mean_pow = 0.0;
        for (double e : series.values()) mean_pow += std::pow(std::abs(e), tau0);
        mean_pow /= static_cast<double>(n);
        ParamVector start;
        start.order = order;
        start.omega = std::max(0.1 * mean_pow, 1e-6);
        start.alpha_plus.assign(order.q, 0.05 / order.q);
        start.alpha_minus.assign(order.q, 0.05 / order.q);
        start.beta.assign(order.p, order.p > 0 ? 0.7 / order.p : 0.0);
        start.tau = tau0;
        ++out.n_restarts_used;
        BfgsResult r = minimize_bfgs(fn, box.to_unconstrained(start), bopt);
        if (!std::isfinite(r.f)) continue;
        const double tau_hat = std::exp(r.x(d - 1));
        const bool better = !best || (r.converged && !best->converged) ||
                            (r.converged == best->converged &&
                             (r.f < best->f || (r.f == best->f && tau_hat < best_tau)));
        if (better) {
            best = std::move(r);
            best_tau = tau_hat;
        }
    }
    if (!best) return out;

    out.params_hat = box.to_params(best->x);
    out.objective = best->f;
    out.converged = best->converged;
    out.iterations = best->iterations;
    out.gradient_max_norm = best->gradient.cwiseAbs().maxCoeff();
    for (double a : out.params_hat.alpha_plus) out.at_boundary |= a < 10 * kCoefficientFloor;
    for (double a : out.params_hat.alpha_minus) out.at_boundary |= a < 10 * kCoefficientFloor;
    for (double b : out.params_hat.beta) out.at_boundary |= b < 10 * kCoefficientFloor;

    try {
        const VolatilityPath path = volatility_filter(series, out.params_hat, options.init);
        out.residuals = path.residuals;
        out.zeta = path.zeta;
        out.score = score_filter(series, out.params_hat, options.init);
    } catch (const NonFiniteVolatility&) {
        out.converged = false;
        return out;
    }
    double k4 = 0.0;
    for (double r : out.residuals) k4 += r * r * r * r;
    out.kappa_hat = k4 / static_cast<double>(n);
    out.J_hat = SymMatrix(out.score.dlog_zeta2.transpose() * out.score.dlog_zeta2 /
                          static_cast<double>(n)).matrix();
    try {
        const SymSolveResult inv = solve_sym(SymMatrix(out.J_hat), Matrix::Identity(d, d));
        out.j_condition = inv.condition;
        const Vector var = (out.kappa_hat - 1.0) * inv.x.diagonal() / static_cast<double>(n);
        out.std_errors = var.cwiseMax(0.0).cwiseSqrt();
    } catch (const SingularMatrix&) {
        out.j_singular = true;
        out.j_condition = std::numeric_limits<double>::infinity();
    }
    return out;
}

}  // namespace apgarch
