#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace hota {

struct OptimOptions {
    int max_iter = 200;
    /// Newton steps with the supplied information matrix after BFGS stops
    /// short of gtol.
    int newton_iter = 30;
    /// Iterate until the relative gradient falls below this...
    double gtol = 1e-10;
    /// ...but accept the point as converged when progress stalls below this.
    double gtol_accept = 1e-6;
};

struct OptimResult {
    Eigen::VectorXd x;
    double f = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    int iterations = 0;
    double rel_grad = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::string message;
};

/// max_i |g_i| max(|x_i|, 1) / max(|f|, 1)
inline double relative_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, double f) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) r = std::max(r, std::abs(g[i]) * std::max(std::abs(x[i]), 1.0));
    return r / std::max(std::abs(f), 1.0);
}

/// BFGS ascent with Armijo backtracking. `inv_curvature0`, when given, seeds
/// the inverse-curvature approximation (the inverse of the negative
/// Hessian); otherwise a scaled identity is used.
template <class F, class G>
OptimResult maximize_bfgs(F&& f, G&& grad, Eigen::VectorXd x, const Eigen::MatrixXd* inv_curvature0 = nullptr,
                          const OptimOptions& opt = {}) {
    const auto n = x.size();
    OptimResult res;
    double fx = f(x);
    if (!std::isfinite(fx)) {
        res.x = x;
        res.message = "objective not finite at the starting point";
        return res;
    }
    Eigen::VectorXd g = grad(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool seeded = false;
    if (inv_curvature0 && inv_curvature0->rows() == n && inv_curvature0->allFinite()) {
        H = *inv_curvature0;
        seeded = true;
    } else {
        H /= std::max(1.0, g.norm());
    }
    int resets = 0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        const double rg = relative_gradient(x, g, fx);
        if (rg <= opt.gtol) break;
        Eigen::VectorXd d = H * g;
        double slope = g.dot(d);
        if (!(slope > 0.0) || !d.allFinite()) {
            H = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, g.norm());
            d = H * g;
            slope = g.dot(d);
        }
        double step = 1.0;
        Eigen::VectorXd xn;
        double fn = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            xn = x + step * d;
            fn = f(xn);
            if (std::isfinite(fn) && fn >= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Line search failed: either we are at the optimum up to
            // rounding, or the curvature model is stale.
            if (rg <= opt.gtol_accept) break;
            if (resets++ < 3) {
                H = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, g.norm());
                continue;
            }
            res.message = "line search failed";
            break;
        }
        // Gain below rounding: f can no longer steer the line search.
        const bool stalled = fn - fx <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
        const Eigen::VectorXd gn = grad(xn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = g - gn;  // gradient change of -f
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (it == 0 && !seeded) H = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += rho * ((1.0 + rho * y.dot(Hy)) * (s * s.transpose()) - (Hy * s.transpose() + s * Hy.transpose()));
        }
        x = xn;
        fx = fn;
        g = gn;
        if (stalled) {
            ++it;
            break;
        }
    }
    res.x = x;
    res.f = fx;
    res.grad = g;
    res.iterations = it;
    res.rel_grad = relative_gradient(x, g, fx);
    res.converged = res.rel_grad <= opt.gtol_accept;
    if (!res.converged && res.message.empty())
        res.message = it >= opt.max_iter ? "maximum iterations reached" : "gradient tolerance not met";
    return res;
}

/// Damped Newton ascent with a caller-supplied negative Hessian. Stops at
/// gtol, or when the information is not positive definite or no step
/// improves f.
template <class F, class G, class J>
OptimResult refine_newton(F&& f, G&& grad, J&& info, OptimResult start, const OptimOptions& opt = {}) {
    OptimResult res = std::move(start);
    if (!res.x.size() || !std::isfinite(res.f)) return res;
    Eigen::VectorXd x = res.x, g = res.grad.size() ? res.grad : grad(x);
    double fx = res.f;
    int it = 0;
    for (; it < opt.newton_iter; ++it) {
        if (relative_gradient(x, g, fx) <= opt.gtol) break;
        const Eigen::MatrixXd Jx = info(x);
        const Eigen::LLT<Eigen::MatrixXd> llt(Jx);
        if (llt.info() != Eigen::Success || !Jx.allFinite()) break;
        const Eigen::VectorXd d = llt.solve(g);
        double step = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 30; ++bt) {
            const Eigen::VectorXd xn = x + step * d;
            const double fn = f(xn);
            const double floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(fx));
            if (std::isfinite(fn) && fn >= fx - floor) {
                const Eigen::VectorXd gn = grad(xn);
                // At the rounding floor f is noise; a smaller gradient decides.
                if (fn > fx + floor || relative_gradient(xn, gn, fn) < relative_gradient(x, g, fx)) {
                    x = xn;
                    fx = fn;
                    g = gn;
                    moved = true;
                }
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    res.x = x;
    res.f = fx;
    res.grad = g;
    res.iterations += it;
    res.rel_grad = relative_gradient(x, g, fx);
    res.converged = res.rel_grad <= opt.gtol_accept;
    if (res.converged) res.message.clear();
    return res;
}

}  // namespace hota
