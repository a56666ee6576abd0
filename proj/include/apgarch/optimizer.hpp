#pragma once

// Unconstrained BFGS with Armijo backtracking. Constraints are handled by the
// caller through a smooth reparameterization.

#include "apgarch/numerics.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace apgarch {

struct BfgsOptions {
    int max_iterations = 500;
    double ftol = 1e-10;          // objective improvement
    double gtol = 1e-6;           // gradient max-norm
    double stall_gtol = 1e-4;     // accepted gradient when the line search can no longer descend
    double max_step = 2.0;        // cap on the max-norm of a trial step
};

struct BfgsResult {
    Vector x;
    double f = std::numeric_limits<double>::infinity();
    Vector gradient;
    int iterations = 0;
    bool converged = false;
    bool stalled = false;  // line search failed; converged only if gradient <= stall_gtol
};

/// Objective callback: returns f(x) and writes the gradient; may return +inf.
using ObjectiveWithGradient = std::function<double(const Vector& x, Vector& grad)>;

inline BfgsResult minimize_bfgs(const ObjectiveWithGradient& fn, Vector x0, const BfgsOptions& opt) {
    const Eigen::Index d = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.gradient.resize(d);
    res.f = fn(res.x, res.gradient);
    if (!std::isfinite(res.f)) return res;

    Matrix h_inv = Matrix::Identity(d, d);
    bool scaled = false;
    Vector grad_new(d), x_new(d);
    double last_improvement = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        res.iterations = iter;
        const double gnorm = res.gradient.cwiseAbs().maxCoeff();
        if (gnorm < opt.gtol && last_improvement < opt.ftol) {
            res.converged = true;
            return res;
        }

        Vector dir = -h_inv * res.gradient;
        double slope = res.gradient.dot(dir);
        if (!(slope < 0.0)) {
            h_inv.setIdentity();
            scaled = false;
            dir = -res.gradient;
            slope = res.gradient.dot(dir);
        }
        double step = 1.0;
        const double dmax = dir.cwiseAbs().maxCoeff();
        if (dmax * step > opt.max_step) step = opt.max_step / dmax;

        bool accepted = false;
        double f_new = 0.0;
        for (int k = 0; k < 60; ++k) {
            x_new = res.x + step * dir;
            f_new = fn(x_new, grad_new);
            if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!h_inv.isIdentity()) {
                // Retry along steepest descent before giving up.
                h_inv.setIdentity();
                scaled = false;
                continue;
            }
            res.stalled = true;
            res.converged = gnorm <= opt.stall_gtol;
            return res;
        }

        const Vector s = x_new - res.x;
        const Vector y = grad_new - res.gradient;
        last_improvement = res.f - f_new;
        res.x = x_new;
        res.f = f_new;
        res.gradient = grad_new;

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                h_inv = Matrix::Identity(d, d) * (sy / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vector hy = h_inv * y;
            h_inv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
                     rho * (hy * s.transpose() + s * hy.transpose());
        }
    }
    res.iterations = opt.max_iterations;
    const double gnorm = res.gradient.cwiseAbs().maxCoeff();
    res.converged = gnorm < opt.gtol && last_improvement < opt.ftol;
    return res;
}

}  // namespace apgarch
