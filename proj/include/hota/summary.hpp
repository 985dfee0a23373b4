#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "hota/errors.hpp"
#include "hota/normal.hpp"

namespace hota {

struct SummaryReport {
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double median = 0.0;
    double q975 = 0.0;
    std::pair<double, double> hpd{0.0, 0.0};
    std::size_t T = 0;
    double level = 0.95;
};

/// Hyndman-Fan type 8 (approximately median-unbiased) quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& x, double p) {
    if (x.empty()) throw ValidationError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
    const double n = static_cast<double>(x.size());
    const double h = std::clamp((n + 1.0 / 3.0) * p + 1.0 / 3.0, 1.0, n);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo >= x.size()) return x.back();
    return x[lo - 1] + frac * (x[lo] - x[lo - 1]);
}

/// Shortest interval holding ceil(level * T) order statistics.
inline std::pair<double, double> hpd_sorted(const std::vector<double>& x, double level) {
    if (!(level > 0.0 && level <= 1.0)) throw ValidationError("HPD level must lie in (0, 1]");
    const std::size_t n = x.size();
    const auto m = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9)));
    if (m == 0) throw ValidationError("HPD of an empty sample");
    std::size_t best = 0;
    for (std::size_t i = 1; i + m <= n; ++i)
        if (x[i + m - 1] - x[i] < x[best + m - 1] - x[best]) best = i;
    return {x[best], x[best + m - 1]};
}

inline SummaryReport summarize(std::vector<double> draws, double level = 0.95) {
    const std::size_t T = draws.size();
    if (T < 100) throw ValidationError("summarize needs at least 100 draws (got " + std::to_string(T) + ")");
    std::sort(draws.begin(), draws.end());
    SummaryReport r;
    r.T = T;
    r.level = level;
    // Sorted summation keeps the result independent of the input order.
    r.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(T);
    double ss = 0.0;
    for (double v : draws) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(T - 1));
    r.q025 = quantile_sorted(draws, 0.025);
    r.median = quantile_sorted(draws, 0.5);
    r.q975 = quantile_sorted(draws, 0.975);
    r.hpd = hpd_sorted(draws, level);
    return r;
}

inline double skewness(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : x) {
        m2 += (v - mu) * (v - mu);
        m3 += (v - mu) * (v - mu) * (v - mu);
    }
    m2 /= n;
    m3 /= n;
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// Gaussian kernel density with bandwidth 1.06 sd T^(-1/5). The evaluation
/// grid spans the sample range padded by 4 bandwidths on each side.
inline DensityEstimate kde(std::vector<double> x, int n_eval = 512) {
    if (x.size() < 100) throw ValidationError("kde needs at least 100 draws");
    if (n_eval < 2) throw ValidationError("kde needs n_eval >= 2");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / (n - 1.0));
    DensityEstimate e;
    e.bandwidth = sd > 0.0 ? 1.06 * sd * std::pow(n, -0.2) : 1e-6 * std::max(1.0, std::abs(mu));
    const double h = e.bandwidth;
    const double lo = x.front() - 4.0 * h, hi = x.back() + 4.0 * h;
    e.grid.resize(static_cast<std::size_t>(n_eval));
    e.density.resize(static_cast<std::size_t>(n_eval));
    for (int i = 0; i < n_eval; ++i) {
        const double g = lo + (hi - lo) * i / (n_eval - 1);
        const auto a = std::lower_bound(x.begin(), x.end(), g - 8.0 * h);
        const auto b = std::upper_bound(a, x.end(), g + 8.0 * h);
        double s = 0.0;
        for (auto it = a; it != b; ++it) s += normal::pdf((g - *it) / h);
        e.grid[static_cast<std::size_t>(i)] = g;
        e.density[static_cast<std::size_t>(i)] = s / (n * h);
    }
    return e;
}

/// Density values at given points with a fixed bandwidth (for aligned overlays).
inline std::vector<double> kde_at(std::vector<double> x, const std::vector<double>& points, double h) {
    if (!(h > 0.0)) throw ValidationError("kde bandwidth must be positive");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double g = points[i];
        const auto a = std::lower_bound(x.begin(), x.end(), g - 8.0 * h);
        const auto b = std::upper_bound(a, x.end(), g + 8.0 * h);
        double s = 0.0;
        for (auto it = a; it != b; ++it) s += normal::pdf((g - *it) / h);
        out[i] = s / (n * h);
    }
    return out;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return s;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ValidationError("ks_distance of an empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// sup |ECDF - F| for a continuous CDF F.
inline double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw ValidationError("ks_distance of an empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// max over `points` of |ECDF(p) - F(p)|.
inline double ecdf_distance_at(std::vector<double> a, const std::vector<double>& points,
                               const std::function<double(double)>& cdf) {
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (double p : points) {
        const double ecdf = static_cast<double>(std::upper_bound(a.begin(), a.end(), p) - a.begin()) / n;
        d = std::max(d, std::abs(ecdf - cdf(p)));
    }
    return d;
}

}  // namespace hota
