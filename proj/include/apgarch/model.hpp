#pragma once

// APGARCH(p,q) parameters, the truncated volatility filter, trajectory
// simulation and the strict-stationarity (top Lyapunov exponent) check.
//
//   eps_t = zeta_t * eta_t
//   zeta_t^tau = omega + sum_i [a+_i (eps+_{t-i})^tau + a-_i (-eps-_{t-i})^tau]
//                      + sum_j b_j zeta_{t-j}^tau

#include "apgarch/errors.hpp"
#include "apgarch/numerics.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace apgarch {

struct ModelOrder {
    int p = 1;  // GARCH lags
    int q = 1;  // ARCH lags

    /// Length of the flat parameter vector (omega, a+, a-, b, tau).
    int n_params() const noexcept { return 2 * q + p + 2; }

    friend bool operator==(const ModelOrder&, const ModelOrder&) = default;
};

inline std::string to_string(const ModelOrder& o) {
    return "(" + std::to_string(o.p) + "," + std::to_string(o.q) + ")";
}

inline void validate_order(const ModelOrder& o) {
    if (o.p < 0) throw ConstraintViolation("p>=0");
    if (o.q < 1) throw ConstraintViolation("q>=1");
}

struct ParamVector {
    double omega = 0.0;
    std::vector<double> alpha_plus;
    std::vector<double> alpha_minus;
    std::vector<double> beta;
    double tau = 1.0;
    ModelOrder order;

    double beta_sum() const { return std::accumulate(beta.begin(), beta.end(), 0.0); }

    /// Flat layout (omega, a+_1..a+_q, a-_1..a-_q, b_1..b_p, tau).
    Vector flat() const {
        Vector v(order.n_params());
        Eigen::Index k = 0;
        v(k++) = omega;
        for (double a : alpha_plus) v(k++) = a;
        for (double a : alpha_minus) v(k++) = a;
        for (double b : beta) v(k++) = b;
        v(k) = tau;
        return v;
    }

    static ParamVector from_flat(const ModelOrder& order, const Vector& v) {
        if (v.size() != order.n_params())
            throw DimensionMismatch("parameter vector has length " + std::to_string(v.size()) +
                                    ", order " + to_string(order) + " needs " +
                                    std::to_string(order.n_params()));
        ParamVector out;
        out.order = order;
        Eigen::Index k = 0;
        out.omega = v(k++);
        out.alpha_plus.resize(order.q);
        out.alpha_minus.resize(order.q);
        out.beta.resize(order.p);
        for (auto& a : out.alpha_plus) a = v(k++);
        for (auto& a : out.alpha_minus) a = v(k++);
        for (auto& b : out.beta) b = v(k++);
        out.tau = v(k);
        return out;
    }

    static ParamVector make(double omega, std::vector<double> alpha_plus,
                            std::vector<double> alpha_minus, std::vector<double> beta, double tau) {
        ParamVector out;
        out.order = {static_cast<int>(beta.size()), static_cast<int>(alpha_plus.size())};
        out.omega = omega;
        out.alpha_plus = std::move(alpha_plus);
        out.alpha_minus = std::move(alpha_minus);
        out.beta = std::move(beta);
        out.tau = tau;
        return out;
    }
};

/// Checks dimensions against the order, positivity and sum(beta) < 1.
inline void validate_params(const ParamVector& params) {
    validate_order(params.order);
    const auto q = static_cast<std::size_t>(params.order.q);
    const auto p = static_cast<std::size_t>(params.order.p);
    if (params.alpha_plus.size() != q || params.alpha_minus.size() != q || params.beta.size() != p)
        throw DimensionMismatch("coefficient vectors do not match order " + to_string(params.order));
    if (!(params.omega > 0.0) || !std::isfinite(params.omega)) throw ConstraintViolation("omega>0");
    if (!(params.tau > 0.0) || !std::isfinite(params.tau)) throw ConstraintViolation("tau>0");
    for (double a : params.alpha_plus)
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConstraintViolation("alpha_plus>=0");
    for (double a : params.alpha_minus)
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConstraintViolation("alpha_minus>=0");
    for (double b : params.beta)
        if (!(b >= 0.0) || !std::isfinite(b)) throw ConstraintViolation("beta>=0");
    if (!(params.beta_sum() < 1.0)) throw ConstraintViolation("sum(beta)<1");
}

/// Observed returns eps_1..eps_n; non-empty and finite.
class Series {
public:
    Series() = default;
    explicit Series(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw DataError("series is empty");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]))
                throw DataError("series value at index " + std::to_string(i) + " is not finite");
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

private:
    std::vector<double> values_;
};

/// Presample values used to start the recursion.
///
/// Mean:  eps = 0, zeta^tau = omega / (1 - sum(beta)).
/// Omega: eps = 0, zeta^tau = omega.
/// Fixed: caller-provided eps_0, eps_-1, ... (q values) and zeta^tau_0, ... (p values).
/// For Mean and Omega the presample depends on the parameter and is
/// differentiated with it; Fixed presamples are constants.
struct InitScheme {
    enum class Kind { Mean, Omega, Fixed };
    Kind kind = Kind::Mean;
    std::vector<double> eps;      // most recent first
    std::vector<double> zeta_tau; // most recent first

    static InitScheme mean() { return {}; }
    static InitScheme omega() { return {Kind::Omega, {}, {}}; }
    static InitScheme fixed(std::vector<double> eps, std::vector<double> zeta_tau) {
        return {Kind::Fixed, std::move(eps), std::move(zeta_tau)};
    }
    /// Zero presample: eps = 0 and zeta^tau = 0 for t <= 0.
    static InitScheme zero(const ModelOrder& o) {
        return fixed(std::vector<double>(o.q, 0.0), std::vector<double>(o.p, 0.0));
    }
};

inline std::string to_string(InitScheme::Kind k) {
    switch (k) {
        case InitScheme::Kind::Mean: return "mean";
        case InitScheme::Kind::Omega: return "zeros";
        case InitScheme::Kind::Fixed: return "fixed";
    }
    return "unknown";
}

struct VolatilityPath {
    std::vector<double> zeta_tau;
    std::vector<double> zeta;
    std::vector<double> residuals;
};

struct InnovationSpec {
    enum class Kind { Normal, StudentT };
    Kind kind = Kind::StudentT;
    double nu = 9.0;

    static InnovationSpec normal() { return {Kind::Normal, 0.0}; }
    static InnovationSpec student_t(double nu) { return {Kind::StudentT, nu}; }

    double draw(RngStream& rng) const {
        return kind == Kind::Normal ? rng.normal() : draw_standardized_t(rng, nu);
    }

    /// E[eta^4] of the unit-variance innovation.
    double fourth_moment() const {
        return kind == Kind::Normal ? 3.0 : 3.0 * (nu - 2.0) / (nu - 4.0);
    }

    void validate() const {
        if (kind == Kind::StudentT && !(nu > 4.0)) throw ConstraintViolation("nu>4");
    }
};

inline std::string to_string(const InnovationSpec& s) {
    if (s.kind == InnovationSpec::Kind::Normal) return "normal";
    std::string nu = std::to_string(s.nu);
    nu.erase(nu.find_last_not_of('0') + 1);
    if (!nu.empty() && nu.back() == '.') nu.pop_back();
    return "student_t(" + nu + ")";
}

inline constexpr double kVolatilityCeiling = 1e300;

namespace detail {

inline double pos_part_pow(double x, double tau) { return x > 0.0 ? std::pow(x, tau) : 0.0; }
inline double neg_part_pow(double x, double tau) { return x < 0.0 ? std::pow(-x, tau) : 0.0; }

inline double presample_zeta_tau(const ParamVector& params, const InitScheme& init, int lag) {
    switch (init.kind) {
        case InitScheme::Kind::Mean: return params.omega / (1.0 - params.beta_sum());
        case InitScheme::Kind::Omega: return params.omega;
        case InitScheme::Kind::Fixed:
            return static_cast<std::size_t>(lag) < init.zeta_tau.size() ? init.zeta_tau[lag] : 0.0;
    }
    return 0.0;
}

inline double presample_eps(const InitScheme& init, int lag) {
    if (init.kind != InitScheme::Kind::Fixed) return 0.0;
    return static_cast<std::size_t>(lag) < init.eps.size() ? init.eps[lag] : 0.0;
}

inline void check_init(const ParamVector& params, const InitScheme& init) {
    if (init.kind != InitScheme::Kind::Fixed) return;
    for (double e : init.eps)
        if (!std::isfinite(e)) throw PreconditionError("presample eps must be finite");
    for (double z : init.zeta_tau)
        if (!(z >= 0.0) || !std::isfinite(z))
            throw PreconditionError("presample zeta^tau must be finite and >= 0");
    (void)params;
}

}  // namespace detail

/// Runs the truncated recursion for zeta_t^tau, t = 1..n.
inline VolatilityPath volatility_filter(const Series& series, const ParamVector& params,
                                        const InitScheme& init = InitScheme::mean()) {
    validate_params(params);
    detail::check_init(params, init);
    const auto n = series.size();
    const int p = params.order.p;
    const int q = params.order.q;
    const double tau = params.tau;

    // Lagged power terms; index 0..q-1 hold eps_0, eps_-1, ... and then the data.
    std::vector<double> pos(q + n), neg(q + n);
    for (int k = 0; k < q; ++k) {
        const double e = detail::presample_eps(init, q - 1 - k);
        pos[k] = detail::pos_part_pow(e, tau);
        neg[k] = detail::neg_part_pow(e, tau);
    }
    for (std::size_t t = 0; t < n; ++t) {
        pos[q + t] = detail::pos_part_pow(series[t], tau);
        neg[q + t] = detail::neg_part_pow(series[t], tau);
    }
    std::vector<double> h(p + n);
    for (int k = 0; k < p; ++k) h[k] = detail::presample_zeta_tau(params, init, p - 1 - k);

    VolatilityPath out;
    out.zeta_tau.resize(n);
    out.zeta.resize(n);
    out.residuals.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double v = params.omega;
        for (int i = 1; i <= q; ++i) {
            const std::size_t idx = q + t - i;
            v += params.alpha_plus[i - 1] * pos[idx] + params.alpha_minus[i - 1] * neg[idx];
        }
        for (int j = 1; j <= p; ++j) v += params.beta[j - 1] * h[p + t - j];
        if (!(v <= kVolatilityCeiling))
            throw NonFiniteVolatility("zeta^tau exceeded 1e300 at t=" + std::to_string(t + 1));
        h[p + t] = v;
        out.zeta_tau[t] = v;
        out.zeta[t] = std::pow(v, 1.0 / tau);
        out.residuals[t] = series[t] / out.zeta[t];
    }
    return out;
}

struct SimulationResult {
    Series series;
    VolatilityPath path;  // path.residuals are the drawn innovations eta_t
    InitScheme presample; // Fixed presample reproducing the returned window exactly
};

inline constexpr int kDefaultBurnIn = 1000;

/// Simulates n observations after discarding burn_in; deterministic in (seed, stream_id).
inline SimulationResult simulate(const ParamVector& params, std::size_t n, std::size_t burn_in,
                                 const InnovationSpec& innovations, std::uint64_t seed,
                                 std::uint64_t stream_id = 0) {
    validate_params(params);
    innovations.validate();
    if (n == 0) throw PreconditionError("simulate: n must be positive");
    const int p = params.order.p;
    const int q = params.order.q;
    const double delta = params.tau;
    const std::size_t total = burn_in + n;
    RngStream rng(seed, stream_id);

    // Histories with presample slots in front (eps = 0, zeta^delta = unconditional mean level).
    std::vector<double> eps(q + total, 0.0), pos(q + total, 0.0), neg(q + total, 0.0);
    std::vector<double> h(p + total, params.omega / (1.0 - params.beta_sum()));
    std::vector<double> eta(total);
    for (std::size_t t = 0; t < total; ++t) {
        double v = params.omega;
        for (int i = 1; i <= q; ++i) {
            const std::size_t idx = q + t - i;
            v += params.alpha_plus[i - 1] * pos[idx] + params.alpha_minus[i - 1] * neg[idx];
        }
        for (int j = 1; j <= p; ++j) v += params.beta[j - 1] * h[p + t - j];
        if (!(v <= kVolatilityCeiling))
            throw NonFiniteVolatility("simulated zeta^delta exceeded 1e300 at step " +
                                      std::to_string(t + 1) + " (explosive parameters)");
        h[p + t] = v;
        eta[t] = innovations.draw(rng);
        const double e = std::pow(v, 1.0 / delta) * eta[t];
        eps[q + t] = e;
        pos[q + t] = detail::pos_part_pow(e, delta);
        neg[q + t] = detail::neg_part_pow(e, delta);
    }

    std::vector<double> kept(eps.begin() + q + burn_in, eps.end());
    SimulationResult out{Series(std::move(kept)), {}, {}};
    out.path.zeta_tau.assign(h.begin() + p + burn_in, h.end());
    out.path.zeta.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.path.zeta[t] = std::pow(out.path.zeta_tau[t], 1.0 / delta);
    out.path.residuals.assign(eta.begin() + burn_in, eta.end());

    out.presample.kind = InitScheme::Kind::Fixed;
    for (int k = 1; k <= q; ++k) out.presample.eps.push_back(eps[q + burn_in - k]);
    for (int k = 1; k <= p; ++k) out.presample.zeta_tau.push_back(h[p + burn_in - k]);
    return out;
}

// ---------------------------------------------------------------------------
// Strict stationarity: top Lyapunov exponent of the random companion products
// ---------------------------------------------------------------------------

struct StationarityVerdict {
    enum class Verdict { Stationary, Explosive, Inconclusive };
    double gamma_estimate = 0.0;
    double standard_error = 0.0;
    std::size_t n_steps = 0;
    Verdict verdict = Verdict::Inconclusive;
};

inline std::string to_string(StationarityVerdict::Verdict v) {
    switch (v) {
        case StationarityVerdict::Verdict::Stationary: return "stationary";
        case StationarityVerdict::Verdict::Explosive: return "explosive";
        case StationarityVerdict::Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

/// log of the smallest normal double; reported when the product collapses to zero.
inline const double kLogMachineFloor = std::log(std::numeric_limits<double>::min());

/// Companion matrix for one innovation draw.
///
/// State z_t = (zeta_t^d, ..., zeta_{t-P+1}^d, (eps+_{t-1})^d, (-eps-_{t-1})^d, ...,
/// (eps+_{t-q+1})^d, (-eps-_{t-q+1})^d) with P = max(p, 1), dimension P + 2(q-1).
/// z_{t+1} = (omega, 0, ...) + C_t z_t.
inline Matrix companion_matrix(const ParamVector& params, double eta) {
    const int p = params.order.p;
    const int q = params.order.q;
    const int big_p = std::max(p, 1);
    const int dim = big_p + 2 * (q - 1);
    const double d = params.tau;
    const double ep = detail::pos_part_pow(eta, d);
    const double en = detail::neg_part_pow(eta, d);
    Matrix c = Matrix::Zero(dim, dim);
    c(0, 0) = (p >= 1 ? params.beta[0] : 0.0) + params.alpha_plus[0] * ep + params.alpha_minus[0] * en;
    for (int j = 2; j <= p; ++j) c(0, j - 1) = params.beta[j - 1];
    for (int i = 2; i <= q; ++i) {
        c(0, big_p + 2 * (i - 2)) = params.alpha_plus[i - 1];
        c(0, big_p + 2 * (i - 2) + 1) = params.alpha_minus[i - 1];
    }
    for (int j = 1; j < big_p; ++j) c(j, j - 1) = 1.0;
    if (q >= 2) {
        c(big_p, 0) = ep;
        c(big_p + 1, 0) = en;
        for (int k = 2; k < 2 * (q - 1); ++k) c(big_p + k, big_p + k - 2) = 1.0;
    }
    return c;
}

/// Estimates gamma = lim (1/t) log ||C_t ... C_1|| by vector iteration with
/// max-norm renormalization every 10 steps; batch means give the standard error.
inline StationarityVerdict lyapunov_exponent(const ParamVector& params,
                                             const InnovationSpec& innovations,
                                             std::size_t n_steps, std::uint64_t seed,
                                             std::uint64_t stream_id = 0) {
    validate_params(params);
    innovations.validate();
    if (n_steps < 10000) throw PreconditionError("lyapunov_exponent: n_steps must be >= 1e4");
    constexpr std::size_t kRenorm = 10;
    constexpr std::size_t kBatches = 50;
    RngStream rng(seed, stream_id);

    const int p = params.order.p;
    const int q = params.order.q;
    const int big_p = std::max(p, 1);
    const double beta1 = p >= 1 ? params.beta[0] : 0.0;
    Matrix c = companion_matrix(params, 0.0);
    Vector z = Vector::Ones(c.rows());
    Vector next(c.rows());

    const std::size_t n_blocks = (n_steps + kRenorm - 1) / kRenorm;
    std::vector<double> batch_sum(kBatches, 0.0);
    std::vector<std::size_t> batch_steps(kBatches, 0);
    double total = 0.0;
    StationarityVerdict out;
    out.n_steps = n_steps;
    for (std::size_t block = 0; block < n_blocks; ++block) {
        const std::size_t len = std::min(kRenorm, n_steps - block * kRenorm);
        for (std::size_t s = 0; s < len; ++s) {
            const double eta = innovations.draw(rng);
            const double ep = detail::pos_part_pow(eta, params.tau);
            const double en = detail::neg_part_pow(eta, params.tau);
            c(0, 0) = beta1 + params.alpha_plus[0] * ep + params.alpha_minus[0] * en;
            if (q >= 2) {
                c(big_p, 0) = ep;
                c(big_p + 1, 0) = en;
            }
            next.noalias() = c * z;
            z.swap(next);
        }
        const double norm = z.cwiseAbs().maxCoeff();
        if (!(norm > 0.0)) {
            out.gamma_estimate = kLogMachineFloor;
            out.standard_error = 0.0;
            out.verdict = StationarityVerdict::Verdict::Stationary;
            return out;
        }
        const double ln = std::log(norm);
        const std::size_t b = block * kBatches / n_blocks;
        batch_sum[b] += ln;
        batch_steps[b] += len;
        total += ln;
        z /= norm;
    }
    out.gamma_estimate = total / static_cast<double>(n_steps);
    std::vector<double> rates(kBatches);
    double mean = 0.0;
    for (std::size_t b = 0; b < kBatches; ++b) {
        rates[b] = batch_sum[b] / static_cast<double>(batch_steps[b]);
        mean += rates[b];
    }
    mean /= kBatches;
    double var = 0.0;
    for (double r : rates) var += (r - mean) * (r - mean);
    var /= (kBatches - 1);
    out.standard_error = std::sqrt(var / kBatches);
    if (out.gamma_estimate + 2.0 * out.standard_error < 0.0)
        out.verdict = StationarityVerdict::Verdict::Stationary;
    else if (out.gamma_estimate - 2.0 * out.standard_error > 0.0)
        out.verdict = StationarityVerdict::Verdict::Explosive;
    else
        out.verdict = StationarityVerdict::Verdict::Inconclusive;
    return out;
}

}  // namespace apgarch
