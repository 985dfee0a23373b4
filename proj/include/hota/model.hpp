#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hota/data.hpp"
#include "hota/errors.hpp"
#include "hota/normal.hpp"
#include "hota/transform.hpp"

namespace hota {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Log-likelihoods of the built-in models. Additive constants that do not
// involve the parameters are dropped.

/// y1 log(2 + theta) + (y2 + y3) log(1 - theta) + y4 log(theta).
inline double loglik_linkage(double theta, const LinkageData& d) {
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("linkage: theta must lie in (0, 1)");
    return d.counts[0] * std::log(2.0 + theta) + (d.counts[1] + d.counts[2]) * std::log1p(-theta) +
           d.counts[3] * std::log(theta);
}

inline double score_linkage(double theta, const LinkageData& d) {
    return d.counts[0] / (2.0 + theta) - (d.counts[1] + d.counts[2]) / (1.0 - theta) + d.counts[3] / theta;
}

/// theta = (beta0, beta1, tau) with sigma = exp(tau).
inline double loglik_censreg(const Vector& theta, const CensoredRegData& d) {
    const double b0 = theta[0], b1 = theta[1], tau = theta[2];
    const double inv_sigma = std::exp(-tau);
    double ssq = 0.0, cens = 0.0;
    std::size_t m = 0;
    for (const auto& r : d.rows) {
        const double resid = r.time - b0 - b1 * r.x;
        if (r.censored) {
            cens += normal::log_sf(resid * inv_sigma);
        } else {
            ssq += resid * resid;
            ++m;
        }
    }
    return -static_cast<double>(m) * tau - 0.5 * inv_sigma * inv_sigma * ssq + cens;
}

inline Vector score_censreg(const Vector& theta, const CensoredRegData& d) {
    const double b0 = theta[0], b1 = theta[1], tau = theta[2];
    const double inv_sigma = std::exp(-tau);
    Vector g = Vector::Zero(3);
    for (const auto& r : d.rows) {
        const double resid = r.time - b0 - b1 * r.x;
        if (r.censored) {
            const double z = resid * inv_sigma;
            const double h = normal::hazard(z);
            g[0] += h * inv_sigma;
            g[1] += h * inv_sigma * r.x;
            g[2] += h * z;
        } else {
            const double w = resid * inv_sigma * inv_sigma;
            g[0] += w;
            g[1] += w * r.x;
            g[2] += resid * resid * inv_sigma * inv_sigma - 1.0;
        }
    }
    return g;
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// y'X beta - sum log(1 + exp(x_i' beta)).
inline double loglik_logistic(const Vector& beta, const LogisticData& d) {
    const Vector eta = d.X * beta;
    double s = d.y.dot(eta);
    for (Eigen::Index i = 0; i < eta.size(); ++i) s -= softplus(eta[i]);
    return s;
}

inline Vector score_logistic(const Vector& beta, const LogisticData& d) {
    const Vector eta = d.X * beta;
    Vector resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double p = eta[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-eta[i])) : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
        resid[i] = d.y[i] - p;
    }
    return d.X.transpose() * resid;
}

/// A parametric model bound to its data. The log-likelihood is written on
/// the natural scale; optimizers see it through the per-coordinate
/// transforms. Immutable after construction.
struct ModelSpec {
    std::string name;
    std::vector<std::string> param_names;
    std::vector<Transform> transforms;
    std::function<double(const Vector&)> loglik;
    /// Optional exact score; finite differences are used when empty.
    std::function<Vector(const Vector&)> gradient;
    Vector start;
    /// Whether the closed-form matching-prior q_B is valid for this model.
    bool supports_matching = false;
    std::shared_ptr<const Dataset> data;

    int dim() const { return static_cast<int>(param_names.size()); }

    int index_of(const std::string& param) const {
        for (std::size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == param) return static_cast<int>(i);
        // Numeric index fallback.
        char* end = nullptr;
        const long k = std::strtol(param.c_str(), &end, 10);
        if (!param.empty() && *end == '\0' && k >= 0 && k < dim()) return static_cast<int>(k);
        throw ValidationError("model '" + name + "' has no parameter '" + param + "'");
    }

    bool in_domain(const Vector& natural) const {
        for (int i = 0; i < dim(); ++i)
            if (!hota::in_domain(transforms[static_cast<std::size_t>(i)], natural[i])) return false;
        return true;
    }

    Vector to_working(const Vector& natural) const {
        Vector u(natural.size());
        for (int i = 0; i < dim(); ++i) u[i] = hota::to_working(transforms[static_cast<std::size_t>(i)], natural[i]);
        return u;
    }

    Vector to_natural(const Vector& working) const {
        Vector t(working.size());
        for (int i = 0; i < dim(); ++i) t[i] = hota::to_natural(transforms[static_cast<std::size_t>(i)], working[i]);
        return t;
    }

    /// Log-likelihood on the natural scale; -inf outside the domain.
    double loglik_natural(const Vector& natural) const {
        if (!in_domain(natural)) return -std::numeric_limits<double>::infinity();
        const double v = loglik(natural);
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    }

    double loglik_working(const Vector& working) const { return loglik_natural(to_natural(working)); }

    bool has_gradient() const { return static_cast<bool>(gradient); }
};

inline ModelSpec make_linkage_model(const LinkageData& d) {
    validate(d);
    auto data = std::make_shared<const Dataset>(d);
    const LinkageData& ref = std::get<LinkageData>(*data);
    ModelSpec m;
    m.name = "linkage";
    m.param_names = {"theta"};
    m.transforms = {Transform::logit};
    m.loglik = [&ref](const Vector& t) { return loglik_linkage(t[0], ref); };
    m.gradient = [&ref](const Vector& t) { return Vector::Constant(1, score_linkage(t[0], ref)); };
    m.start = Vector::Constant(1, 0.5);
    m.data = std::move(data);
    return m;
}

inline ModelSpec make_censreg_model(const CensoredRegData& d) {
    validate(d);
    auto data = std::make_shared<const Dataset>(d);
    const CensoredRegData& ref = std::get<CensoredRegData>(*data);
    ModelSpec m;
    m.name = "censreg";
    m.param_names = {"beta0", "beta1", "tau"};
    // tau = log(sigma) is itself the reported parameter, so all three
    // coordinates are unconstrained.
    m.transforms = {Transform::identity, Transform::identity, Transform::identity};
    m.loglik = [&ref](const Vector& t) { return loglik_censreg(t, ref); };
    m.gradient = [&ref](const Vector& t) { return score_censreg(t, ref); };

    // Least squares on the uncensored rows as a starting point.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, k = 0;
    for (const auto& r : ref.rows)
        if (!r.censored) {
            sx += r.x, sy += r.time, sxx += r.x * r.x, sxy += r.x * r.time, k += 1;
        }
    const double den = k * sxx - sx * sx;
    const double b1 = (k > 1 && den > 0) ? (k * sxy - sx * sy) / den : 0.0;
    const double b0 = (sy - b1 * sx) / k;
    double ss = 0;
    for (const auto& r : ref.rows)
        if (!r.censored) ss += std::pow(r.time - b0 - b1 * r.x, 2);
    const double sigma = k > 2 ? std::sqrt(ss / (k - 2)) : 1.0;
    m.start = Vector(3);
    m.start << b0, b1, std::log(std::max(sigma, 1e-3));
    m.data = std::move(data);
    return m;
}

inline ModelSpec make_logistic_model(const LogisticData& d) {
    validate(d);
    auto data = std::make_shared<const Dataset>(d);
    const LogisticData& ref = std::get<LogisticData>(*data);
    ModelSpec m;
    m.name = "logistic";
    const auto p = ref.X.cols();
    for (Eigen::Index j = 0; j < p; ++j) m.param_names.push_back("beta" + std::to_string(j));
    m.transforms.assign(static_cast<std::size_t>(p), Transform::identity);
    m.loglik = [&ref](const Vector& b) { return loglik_logistic(b, ref); };
    m.gradient = [&ref](const Vector& b) { return score_logistic(b, ref); };
    m.start = Vector::Zero(p);
    m.supports_matching = true;
    m.data = std::move(data);
    return m;
}

}  // namespace hota
