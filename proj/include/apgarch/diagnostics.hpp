#pragma once

// Portmanteau adequacy test built on squared-residual autocovariances, with
// the Box-Pierce / Ljung-Box statistics as (non-robust) baselines.

#include "apgarch/errors.hpp"
#include "apgarch/estimation.hpp"
#include "apgarch/numerics.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace apgarch {

struct ResidualAutocovariances {
    std::vector<double> r;  // r_1..r_m
    int m = 0;
    std::size_t n = 0;
};

/// r_h = (1/n) sum_{t=h+1..n} (eta_t^2 - 1)(eta_{t-h}^2 - 1), h = 1..m.
inline ResidualAutocovariances squared_residual_autocov(std::span<const double> residuals, int m) {
    const std::size_t n = residuals.size();
    if (m < 1) throw PreconditionError("squared_residual_autocov: m must be positive");
    if (static_cast<std::size_t>(m) >= n)
        throw LagTooLarge("lag m=" + std::to_string(m) + " must be below n=" + std::to_string(n));
    std::vector<double> centred(n);
    for (std::size_t t = 0; t < n; ++t) centred[t] = residuals[t] * residuals[t] - 1.0;
    ResidualAutocovariances out{std::vector<double>(m, 0.0), m, n};
    for (int h = 1; h <= m; ++h) {
        double s = 0.0;
        for (std::size_t t = h; t < n; ++t) s += centred[t] * centred[t - h];
        out.r[h - 1] = s / static_cast<double>(n);
    }
    return out;
}

/// C_m(h,k) = -(1/n) sum_{t=h+1..n} (eta_{t-h}^2 - 1) dlog_zeta2(t, k).
inline Matrix c_m_hat(std::span<const double> residuals, const Matrix& dlog_zeta2, int m) {
    const auto n = static_cast<Eigen::Index>(residuals.size());
    if (dlog_zeta2.rows() != n) throw DimensionMismatch("c_m_hat: score rows differ from residual count");
    if (m < 1 || m >= n) throw LagTooLarge("c_m_hat: lag out of range");
    Matrix c = Matrix::Zero(m, dlog_zeta2.cols());
    for (int h = 1; h <= m; ++h) {
        for (Eigen::Index t = h; t < n; ++t) {
            const double lagged = residuals[t - h] * residuals[t - h] - 1.0;
            c.row(h - 1) += lagged * dlog_zeta2.row(t);
        }
    }
    return -c / static_cast<double>(n);
}

/// (kappa-1)^2 I - (kappa-1) C J^{-1} C', symmetrized.
inline Matrix d_hat(double kappa_hat, const Matrix& c_m, const Matrix& j_hat) {
    if (c_m.cols() != j_hat.rows()) throw DimensionMismatch("d_hat: C and J dimensions differ");
    const Eigen::Index m = c_m.rows();
    const double km1 = kappa_hat - 1.0;
    const SymSolveResult jinv_ct = solve_sym(SymMatrix(j_hat), c_m.transpose());
    const Matrix d = km1 * km1 * Matrix::Identity(m, m) - km1 * c_m * jinv_ct.x;
    return SymMatrix(d).matrix();
}

inline constexpr double kEigenFloorRatio = 1e-10;

/// Quadratic form n r' D^{-1} r with eigenvalues floored at 1e-10 * max.
struct QuadraticFormResult {
    std::optional<double> value;  // empty when D has no positive eigenvalue
    bool floored = false;         // D was not positive definite
};

inline QuadraticFormResult portmanteau_quadratic_form(const Matrix& d, std::span<const double> r,
                                                      std::size_t n) {
    const SymEigen eig = sym_eigen(SymMatrix(d));
    const double max_ev = eig.values.maxCoeff();
    QuadraticFormResult out;
    if (!(max_ev > 0.0)) return out;
    const double floor = kEigenFloorRatio * max_ev;
    Vector rv(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) rv(static_cast<Eigen::Index>(i)) = r[i];
    const Vector proj = eig.vectors.transpose() * rv;
    double s = 0.0;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        double ev = eig.values(i);
        if (ev < floor) {
            ev = floor;
            out.floored = true;
        }
        s += proj(i) * proj(i) / ev;
    }
    out.value = static_cast<double>(n) * s;
    return out;
}

struct BoxPierceLjungBox {
    double bp = 0.0;
    double lb = 0.0;
};

/// Q_BP = n sum rho^2(h), Q_LB = n(n+2) sum rho^2(h)/(n-h) from given autocorrelations.
inline BoxPierceLjungBox box_pierce_ljung_box_from_acf(std::span<const double> rho, std::size_t n) {
    BoxPierceLjungBox out;
    const auto nd = static_cast<double>(n);
    for (std::size_t h = 1; h <= rho.size(); ++h) {
        const double r2 = rho[h - 1] * rho[h - 1];
        out.bp += r2;
        out.lb += r2 / (nd - static_cast<double>(h));
    }
    out.bp *= nd;
    out.lb *= nd * (nd + 2.0);
    return out;
}

/// Sample autocorrelations (divisor n, de-meaned) of eta_t^2 at lags 1..m.
inline std::vector<double> squared_residual_acf(std::span<const double> residuals, int m) {
    const std::size_t n = residuals.size();
    if (m < 1) throw PreconditionError("squared_residual_acf: m must be positive");
    if (static_cast<std::size_t>(m) >= n) throw LagTooLarge("lag m must be below n");
    std::vector<double> x(n);
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = residuals[t] * residuals[t];
        mean += x[t];
    }
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double& v : x) {
        v -= mean;
        c0 += v * v;
    }
    std::vector<double> rho(m, 0.0);
    if (c0 == 0.0) return rho;
    for (int h = 1; h <= m; ++h) {
        double s = 0.0;
        for (std::size_t t = h; t < n; ++t) s += x[t] * x[t - h];
        rho[h - 1] = s / c0;
    }
    return rho;
}

inline BoxPierceLjungBox box_pierce_ljung_box(std::span<const double> residuals, int m) {
    const auto rho = squared_residual_acf(residuals, m);
    return box_pierce_ljung_box_from_acf(rho, residuals.size());
}

struct LagResult {
    int m = 0;
    std::optional<double> statistic;  // empty: D was numerically singular
    std::optional<double> p_value;
    bool d_floored = false;           // D not PD; eigenvalues floored
    double bp_statistic = 0.0;
    double lb_statistic = 0.0;
    double bp_p_value = 1.0;          // naive chi2_m reference (non-robust)
    double lb_p_value = 1.0;
};

struct DiagnosticsReport {
    ResidualAutocovariances r_m;
    Matrix C_m_hat;
    Matrix D_hat;
    double kappa_hat = 0.0;
    std::optional<double> statistic;
    std::optional<double> p_value;
    std::vector<LagResult> per_lag;   // m' = 1..m_max
    double bp_statistic = 0.0;
    double lb_statistic = 0.0;
    std::pair<double, double> bp_lb_pvalues{1.0, 1.0};
};

/// Assembles the report for residuals and score at a parameter. Exposed
/// separately from portmanteau_test so the pieces can be driven directly.
inline DiagnosticsReport portmanteau_from_parts(std::span<const double> residuals,
                                                const Matrix& dlog_zeta2, const Matrix& j_hat,
                                                double kappa_hat, int m_max) {
    const std::size_t n = residuals.size();
    if (m_max < 1) throw PreconditionError("portmanteau_test: m_max must be positive");
    if (static_cast<double>(m_max) >= static_cast<double>(n) / 10.0)
        throw LagTooLarge("portmanteau_test: m_max=" + std::to_string(m_max) + " must be below n/10");
    DiagnosticsReport rep;
    rep.kappa_hat = kappa_hat;
    rep.r_m = squared_residual_autocov(residuals, m_max);
    rep.C_m_hat = c_m_hat(residuals, dlog_zeta2, m_max);
    rep.D_hat = d_hat(kappa_hat, rep.C_m_hat, j_hat);
    const auto rho = squared_residual_acf(residuals, m_max);

    for (int mp = 1; mp <= m_max; ++mp) {
        LagResult lag;
        lag.m = mp;
        const auto qf = portmanteau_quadratic_form(rep.D_hat.topLeftCorner(mp, mp),
                                                   std::span<const double>(rep.r_m.r).first(mp), n);
        lag.d_floored = qf.floored;
        if (qf.value) {
            lag.statistic = qf.value;
            lag.p_value = chi2_sf(*qf.value, mp);
        }
        const auto bplb = box_pierce_ljung_box_from_acf(std::span<const double>(rho).first(mp), n);
        lag.bp_statistic = bplb.bp;
        lag.lb_statistic = bplb.lb;
        lag.bp_p_value = chi2_sf(bplb.bp, mp);
        lag.lb_p_value = chi2_sf(bplb.lb, mp);
        rep.per_lag.push_back(lag);
    }
    const LagResult& top = rep.per_lag.back();
    rep.statistic = top.statistic;
    rep.p_value = top.p_value;
    rep.bp_statistic = top.bp_statistic;
    rep.lb_statistic = top.lb_statistic;
    rep.bp_lb_pvalues = {top.bp_p_value, top.lb_p_value};
    return rep;
}

/// Portmanteau test of a fitted model for every m' = 1..m_max.
/// Throws SingularMatrix when J_hat cannot be inverted.
inline DiagnosticsReport portmanteau_test(const Series& series, const FitResult& fit, int m_max) {
    if (!fit.converged) throw PreconditionError("portmanteau_test: fit did not converge");
    if (fit.residuals.size() != series.size())
        throw DimensionMismatch("portmanteau_test: fit residuals do not match the series");
    return portmanteau_from_parts(fit.residuals, fit.score.dlog_zeta2, fit.J_hat, fit.kappa_hat, m_max);
}

}  // namespace apgarch
