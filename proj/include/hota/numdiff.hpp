#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "hota/model.hpp"

namespace hota {

/// Central-difference step cbrt(eps) * max(1, |x|), shrunk so that both
/// probe points stay inside (lo, hi).
inline double central_step(double x, double lo = -std::numeric_limits<double>::infinity(),
                           double hi = std::numeric_limits<double>::infinity()) {
    static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    double h = base * std::max(1.0, std::abs(x));
    h = std::min({h, 0.5 * (x - lo), 0.5 * (hi - x)});
    // Make x + h exactly representable relative to x.
    volatile double t = x + h;
    return t - x;
}

template <class F>
Vector fd_gradient(F&& f, const Vector& x) {
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = central_step(x[i]);
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Sixth-order central differences on a 7-point stencil.
template <class F>
Vector stencil7_gradient(F&& f, const Vector& x) {
    static const double base = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / 7.0);
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = base * std::max(1.0, std::abs(x[i]));
        auto at = [&](double k) {
            probe[i] = x[i] + k * h;
            return f(probe);
        };
        const double d = 45.0 * (at(1) - at(-1)) - 9.0 * (at(2) - at(-2)) + (at(3) - at(-3));
        probe[i] = x[i];
        g[i] = d / (60.0 * h);
    }
    return g;
}

/// Score on the natural scale: the model's own if it has one, central
/// differences otherwise.
inline Vector natural_gradient(const ModelSpec& model, const Vector& theta) {
    if (model.has_gradient()) return model.gradient(theta);
    return fd_gradient([&](const Vector& t) { return model.loglik_natural(t); }, theta);
}

inline Vector working_gradient(const ModelSpec& model, const Vector& u) {
    Vector g = natural_gradient(model, model.to_natural(u));
    for (int i = 0; i < model.dim(); ++i) g[i] *= jacobian(model.transforms[static_cast<std::size_t>(i)], u[i]);
    return g;
}

/// Observed information -d^2 l / d theta_a d theta_b over the listed
/// coordinates, by central differences of the score (natural scale).
inline Matrix observed_information(const ModelSpec& model, const Vector& theta, const std::vector<int>& coords) {
    const auto k = static_cast<Eigen::Index>(coords.size());
    Matrix J(k, k);
    Vector probe = theta;
    for (Eigen::Index b = 0; b < k; ++b) {
        const int cb = coords[static_cast<std::size_t>(b)];
        const Transform t = model.transforms[static_cast<std::size_t>(cb)];
        const double h = central_step(theta[cb], lower_bound(t), upper_bound(t));
        probe[cb] = theta[cb] + h;
        const Vector gp = natural_gradient(model, probe);
        probe[cb] = theta[cb] - h;
        const Vector gm = natural_gradient(model, probe);
        probe[cb] = theta[cb];
        for (Eigen::Index a = 0; a < k; ++a)
            J(a, b) = -(gp[coords[static_cast<std::size_t>(a)]] - gm[coords[static_cast<std::size_t>(a)]]) / (2.0 * h);
    }
    return 0.5 * (J + J.transpose());
}

inline Matrix observed_information(const ModelSpec& model, const Vector& theta) {
    std::vector<int> all(static_cast<std::size_t>(model.dim()));
    for (int i = 0; i < model.dim(); ++i) all[static_cast<std::size_t>(i)] = i;
    return observed_information(model, theta, all);
}

}  // namespace hota
