#pragma once

// Shared numerical kernels: chi-square distribution functions, reproducible
// random streams and small dense symmetric linear algebra.

#include "apgarch/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace apgarch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Incomplete gamma / chi-square
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kGammaEps = 1e-16;
inline constexpr int kGammaMaxIter = 10000;

// Series for P(a, x), valid for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kGammaMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kGammaMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_fraction(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), accurate in the far tail.
inline double regularized_gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_fraction(a, x);
}

inline double chi2_cdf(double x, int dof) {
    if (dof <= 0) throw PreconditionError("chi2_cdf: dof must be positive");
    if (!(x > 0.0)) return 0.0;
    return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

/// Upper tail 1 - F(x); this is the p-value of a chi-square test statistic.
inline double chi2_sf(double x, int dof) {
    if (dof <= 0) throw PreconditionError("chi2_sf: dof must be positive");
    if (!(x > 0.0)) return 1.0;
    return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

/// Inverse of chi2_cdf by bracketing and bisection.
inline double chi2_quantile(double p, int dof) {
    if (!(p > 0.0 && p < 1.0)) throw PreconditionError("chi2_quantile: p must lie in (0,1)");
    if (dof <= 0) throw PreconditionError("chi2_quantile: dof must be positive");
    double lo = 0.0;
    double hi = std::max(1.0, static_cast<double>(dof));
    while (chi2_cdf(hi, dof) < p) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, dof) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// A value-semantic random stream fully determined by (seed, stream_id).
///
/// Monte Carlo replication r uses stream_id = r, so results do not depend on
/// which worker runs which replication. Uniform, normal and Student-t draws are
/// computed from raw 64-bit words by fixed formulas, so sequences are identical
/// on every conforming platform.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32), 0x61706761u};
        engine_.seed(seq);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Student-t(nu) draw (Bailey's polar method) rescaled to unit variance.
inline double draw_standardized_t(RngStream& rng, double nu) {
    if (!(nu > 4.0)) throw PreconditionError("draw_standardized_t: nu must exceed 4");
    for (;;) {
        const double u = 2.0 * rng.uniform() - 1.0;
        const double v = 2.0 * rng.uniform() - 1.0;
        const double w = u * u + v * v;
        if (w >= 1.0 || w == 0.0) continue;
        const double t = u * std::sqrt(nu * (std::pow(w, -2.0 / nu) - 1.0) / w);
        return t * std::sqrt((nu - 2.0) / nu);
    }
}

// ---------------------------------------------------------------------------
// Symmetric linear algebra
// ---------------------------------------------------------------------------

inline constexpr double kMaxCondition = 1e12;

/// Dense symmetric matrix. Construction symmetrizes the input as (A + A')/2.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& a) {
        if (a.rows() != a.cols()) throw DimensionMismatch("SymMatrix: matrix is not square");
        data_ = 0.5 * (a + a.transpose());
    }

    Eigen::Index dimension() const noexcept { return data_.rows(); }
    const Matrix& matrix() const noexcept { return data_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }

private:
    Matrix data_;
};

struct SymSolveResult {
    Matrix x;
    double condition = 0.0;
};

struct SymEigen {
    Vector values;  // ascending
    Matrix vectors;
};

inline SymEigen sym_eigen(const SymMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix());
    if (solver.info() != Eigen::Success) throw SingularMatrix("symmetric eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Spectral condition number |lambda|_max / |lambda|_min (infinite when singular).
inline double condition_number(const SymEigen& eig) {
    const double max_abs = eig.values.cwiseAbs().maxCoeff();
    const double min_abs = eig.values.cwiseAbs().minCoeff();
    if (min_abs == 0.0) return std::numeric_limits<double>::infinity();
    return max_abs / min_abs;
}

/// Solves A X = B for symmetric A. Throws SingularMatrix when the condition
/// estimate exceeds 1e12.
inline SymSolveResult solve_sym(const SymMatrix& a, const Matrix& b) {
    if (a.dimension() != b.rows()) throw DimensionMismatch("solve_sym: row count mismatch");
    if (a.dimension() == 0) return {b, 1.0};
    const SymEigen eig = sym_eigen(a);
    const double cond = condition_number(eig);
    if (!std::isfinite(cond) || cond > kMaxCondition)
        throw SingularMatrix("solve_sym: matrix is singular or ill-conditioned (condition " +
                             std::to_string(cond) + ")");
    const Vector inv = eig.values.cwiseInverse();
    Matrix x = eig.vectors * inv.asDiagonal() * (eig.vectors.transpose() * b);
    return {std::move(x), cond};
}

}  // namespace apgarch
