#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "hota/errors.hpp"

namespace hota::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double pdf(double x) { return std::exp(log_pdf(x)); }

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x), without cancellation for large x.
inline double sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Mills ratio (1 - Phi(x)) / phi(x) by Laplace's continued fraction,
// evaluated bottom-up. Only used for x >= 5 where 40 terms are plenty.
inline double mills_ratio_cf(double x) {
    double tail = x;
    for (int k = 40; k >= 1; --k) tail = x + k / tail;
    return 1.0 / tail;
}

}  // namespace detail

/// log(1 - Phi(x)), stable for all finite x.
inline double log_sf(double x) {
    if (x < 5.0) return std::log(sf(x));
    return log_pdf(x) + std::log(detail::mills_ratio_cf(x));
}

/// log Phi(x).
inline double log_cdf(double x) { return log_sf(-x); }

/// Hazard phi(x) / (1 - Phi(x)) (inverse Mills ratio).
inline double hazard(double x) {
    if (x < 5.0) return std::exp(log_pdf(x) - std::log(sf(x)));
    return 1.0 / detail::mills_ratio_cf(x);
}

/// Phi^{-1}(p) for p in (0, 1).
inline double quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw DomainError("normal quantile requires p in [0, 1]");
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace hota::normal
