#pragma once

#include <cmath>
#include <limits>
#include <string_view>

namespace hota {

/// Map between a coordinate's natural scale (where the model and the prior
/// are written) and the unconstrained working scale used by optimizers.
enum class Transform { identity, log, logit };

inline std::string_view to_string(Transform t) {
    switch (t) {
        case Transform::identity: return "identity";
        case Transform::log: return "log";
        case Transform::logit: return "logit";
    }
    return "?";
}

inline double to_working(Transform t, double natural) {
    switch (t) {
        case Transform::identity: return natural;
        case Transform::log: return std::log(natural);
        case Transform::logit: return std::log(natural) - std::log1p(-natural);
    }
    return natural;
}

inline double to_natural(Transform t, double working) {
    switch (t) {
        case Transform::identity: return working;
        case Transform::log: return std::exp(working);
        case Transform::logit:
            return working >= 0.0 ? 1.0 / (1.0 + std::exp(-working))
                                  : std::exp(working) / (1.0 + std::exp(working));
    }
    return working;
}

/// d(natural)/d(working) evaluated at a working-scale point.
inline double jacobian(Transform t, double working) {
    switch (t) {
        case Transform::identity: return 1.0;
        case Transform::log: return std::exp(working);
        case Transform::logit: {
            const double p = to_natural(t, working);
            return p * (1.0 - p);
        }
    }
    return 1.0;
}

/// d^2(natural)/d(working)^2.
inline double jacobian_derivative(Transform t, double working) {
    switch (t) {
        case Transform::identity: return 0.0;
        case Transform::log: return std::exp(working);
        case Transform::logit: {
            const double p = to_natural(t, working);
            return p * (1.0 - p) * (1.0 - 2.0 * p);
        }
    }
    return 0.0;
}

inline double lower_bound(Transform t) {
    return t == Transform::identity ? -std::numeric_limits<double>::infinity() : 0.0;
}

inline double upper_bound(Transform t) {
    return t == Transform::logit ? 1.0 : std::numeric_limits<double>::infinity();
}

/// Strict interior of the natural domain.
inline bool in_domain(Transform t, double natural) {
    return std::isfinite(natural) && natural > lower_bound(t) && natural < upper_bound(t);
}

}  // namespace hota
